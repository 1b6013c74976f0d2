import sys

from objcheck.objcheck import run

sys.exit(run())
