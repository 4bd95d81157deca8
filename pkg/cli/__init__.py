from cli.config import RunConfig, default_tree, merge, parse_override, SECTIONS, RESOLVED_CONFIG_FILE
from cli.main import main, build_parser, EXIT_CODES
