# This file makes the 'analysis' directory a package. 