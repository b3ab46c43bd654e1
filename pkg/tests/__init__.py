"""diffprobe test suite"""
