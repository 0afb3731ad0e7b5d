import logging
import os

from dotenv import load_dotenv

from piezoscatter.cli import cli

# Load environment variables
load_dotenv()

# Configure logging
logging.basicConfig(
    level=os.getenv("PIEZOSCATTER_LOG_LEVEL", "INFO").upper(),
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
)
logger = logging.getLogger(__name__)


def main():
    """Console entry point."""
    cli(prog_name="piezoscatter")


if __name__ == "__main__":
    main()
