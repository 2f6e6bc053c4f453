from .main import build_parser, main, parse_and_dispatch
