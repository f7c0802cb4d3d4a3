"""Helpers shared by the app entry point."""
import os


def clamp(value, low, high):
    return max(low, min(value, high))


class Logger:
    def log(self, msg):
        print(msg)
