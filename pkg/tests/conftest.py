import sys
from pathlib import Path

# make the reference oracles in this directory importable from any rootdir
sys.path.insert(0, str(Path(__file__).parent))
