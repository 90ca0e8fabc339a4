import logging
import sys
from typing import Optional, Sequence

from commands import run_subcommand
from treeharm.config import Config

logger = logging.getLogger(__name__)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Точка входа"""
    config = Config.load()
    logging.basicConfig(
        level=getattr(logging, config.log_level, logging.WARNING),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    logging.captureWarnings(True)
    try:
        return run_subcommand(sys.argv[1:] if argv is None else list(argv), config)
    except KeyboardInterrupt:
        print("\n👋 Работа прервана пользователем", file=sys.stderr)
        return 130


if __name__ == "__main__":
    sys.exit(main())
