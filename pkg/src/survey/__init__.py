# This file makes the 'survey' directory a package.
