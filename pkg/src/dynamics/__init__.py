# This file makes the 'dynamics' directory a package.
