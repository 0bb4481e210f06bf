import logging
from dotenv import load_dotenv

load_dotenv()

from scarif.config import ScarifSettings

# Configure logging
logging.basicConfig(level=ScarifSettings.from_env().log_level)

from scarif.cli import cli


if __name__ == "__main__":
    cli()
