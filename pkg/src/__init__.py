# This file makes the 'src' directory a package.

__version__ = "0.3.0"
