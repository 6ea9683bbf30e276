"""
Command-line tools and file formats for clusterfuse.
"""

from .main import build_parser, main

__all__ = ['build_parser', 'main']
