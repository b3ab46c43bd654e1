"""Answers hello, then writes a line that is not a protocol message"""
import json
import sys

sys.stdin.readline()
sys.stdout.write(json.dumps({"type": "hello", "protocol_version": 1, "payload": {"game": "garbage"}}) + "\n")
sys.stdout.write("this is not json\n")
sys.stdout.flush()
sys.stdin.read()
