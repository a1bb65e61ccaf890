# This file makes the 'export' directory a package.
