"""
sbm-shift - spin-boson dynamics in a shifted boson basis.

Main entry point for the CLI application.

Usage:
    python app.py ground --alpha 0.1 --s 1
    python app.py evolve --config run.json --t-final 100
    python app.py analyze --trajectory-file runs/trajectory.csv

Exit codes: 0 success, 2 configuration or checkpoint error,
3 truncation budget exceeded, 4 analysis found nothing, 1 anything else.
"""

import sys
from typing import List, Optional

from sbm_shift import (
    AnalysisError,
    CheckpointError,
    TruncationBudgetExceeded,
    ValidationError,
)
from sbm_shift.cli import (
    COMMAND_HANDLERS,
    build_config,
    configure_logging,
    create_parser,
    print_run_info,
)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_TRUNCATION = 3
EXIT_ANALYSIS = 4


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point for the CLI."""
    parser = create_parser()
    args = parser.parse_args(argv)
    verbose = False

    try:
        config = build_config(args)
        verbose = config.verbosity >= 2
        configure_logging(config)
        print_run_info(config, verbose=verbose)

        COMMAND_HANDLERS[config.kind](config)
        return EXIT_OK

    except (ValidationError, CheckpointError) as e:
        print(f"[ERROR] {e}", file=sys.stderr)
        return EXIT_CONFIG

    except TruncationBudgetExceeded as e:
        print(f"[ERROR] {e}; partial trajectory kept", file=sys.stderr)
        return EXIT_TRUNCATION

    except AnalysisError as e:
        print(f"[ERROR] Analysis failed: {e}", file=sys.stderr)
        return EXIT_ANALYSIS

    except Exception as e:
        print(f"[ERROR] Run failed: {e}", file=sys.stderr)
        if verbose:
            import traceback
            traceback.print_exc()
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
