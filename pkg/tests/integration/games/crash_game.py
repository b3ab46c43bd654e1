"""Answers hello, then exits with status 3 before sending any state"""
import json
import sys

sys.stdin.readline()
sys.stdout.write(json.dumps({"type": "hello", "protocol_version": 1, "payload": {"game": "crash"}}) + "\n")
sys.stdout.flush()
sys.stderr.write("crash_game: giving up\n")
sys.exit(3)
