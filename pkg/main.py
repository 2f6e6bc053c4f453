import sys

from src.cli.main import parse_and_dispatch

if __name__ == '__main__':
    sys.exit(parse_and_dispatch(sys.argv[1:]))
