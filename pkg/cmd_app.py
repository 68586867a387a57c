'''Simple command line app for fair post-processing of multiclass predictions.

Usage: python cmd_app.py <subcommand> [flags]; see --help.
'''
import sys

from fairadj.cli import main


if __name__ == '__main__':
    sys.exit(main())
