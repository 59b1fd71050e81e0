import gettext
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

try:
    # Change here if project is renamed and does not equal the package name
    dist_name = "Zeros_Lab"
    __version__ = version(dist_name)
except PackageNotFoundError:  # pragma: no cover
    __version__ = "unknown"

# Install gettext for any file in the application
localedir = Path(__file__).resolve().parent / "locale"
gettext.bindtextdomain("zeros_lab", str(localedir))
gettext.textdomain("zeros_lab")
_ = gettext.gettext
