import sys

from ewsn_retrieval.cli import main

sys.exit(main())
