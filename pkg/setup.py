#!/usr/bin/env python
"""
    Setup file for zeros_lab.
    Use setup.cfg to configure your project.
"""
from setuptools import setup

if __name__ == "__main__":
    setup()
