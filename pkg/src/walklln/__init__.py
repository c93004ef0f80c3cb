"""Monte Carlo checks of local-time limit laws for transient random walks
on Z^d and free groups."""
from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("walklln")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0+unknown"
