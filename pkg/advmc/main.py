import argparse
import sys
from typing import List, Optional

from dotenv import load_dotenv
from pydantic import ValidationError

from advmc.tools.registry import CommandRegistry
from advmc.utils.errors import AdvmcError
from advmc.utils.logging import get_logger

EXIT_DOMAIN_ERROR = 1
EXIT_USAGE = 2

logger = get_logger(__name__)


class ArgumentParser(argparse.ArgumentParser):
    """argparse with the `error:` prefix and exit code 2 on usage errors"""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"error: {message}\n")


def build_parser(registry: CommandRegistry) -> ArgumentParser:
    parser = ArgumentParser(prog="advmc", description="Adversarial robustness of Markov chains")
    subparsers = parser.add_subparsers(dest="command", required=True, parser_class=ArgumentParser)
    registry.configure(subparsers)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    load_dotenv()
    registry = CommandRegistry()
    args = build_parser(registry).parse_args(argv)
    try:
        return registry.call_command(args.command, args)
    except (AdvmcError, ValidationError, ValueError) as e:
        logger.debug(f"{args.command} failed: {e!r}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DOMAIN_ERROR


if __name__ == "__main__":
    sys.exit(main())
