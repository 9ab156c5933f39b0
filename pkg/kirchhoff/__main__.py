"""CLI entry point of kirchhoff.

Run `python3 -m kirchhoff --help` to get the command line interface
help.
"""

# Built-in
import logging
import shlex
import sys

# PyPI
import rich.logging

# Package
import kirchhoff.parsers as parser
import kirchhoff.shell
from kirchhoff.errors import ExitCode

FMT_STDOUT = "%(asctime)s %(name)s %(levelname)s %(message)s"


def main(arglist) -> int:
    """CLI main function, returns the exit code"""

    # Parse main command line arguments
    args, unknown_args = parser.main.parse_known_args(args=arglist)
    if args.command is None:
        parser.main.print_help()
        return ExitCode.USAGE
    args.command = args.command.replace("-", "_")

    # Parse the command specific arguments
    try:
        p = getattr(parser, args.command)
    except AttributeError:
        print(f"Unknown command: {args.command!r}", file=sys.stderr)
        return ExitCode.USAGE
    try:
        p.parse_args(unknown_args, args)
    except SystemExit as error:
        return ExitCode.OK if error.code == 0 else ExitCode.USAGE

    # Setup logging
    logging.basicConfig(
        level=getattr(logging, args.log_level),
        format=FMT_STDOUT,
        datefmt="[%X]",
        handlers=[rich.logging.RichHandler(rich_tracebacks=True)],
    )
    logging.getLogger(__package__).setLevel(args.log_level)

    intrpr = kirchhoff.shell.CommandInterpreter(
        output_dir=args.output_dir, allow_cli_args=False
    )

    # Run interactive mode or single shot command
    if args.command == "cmd":
        intrpr.cmdloop()
        return ExitCode(intrpr.exit_code)
    intrpr.runcmds_plus_hooks([shlex.join([args.command, *unknown_args])])
    return ExitCode(intrpr.exit_code)


if __name__ == "__main__":
    try:
        sys.exit(main(sys.argv[1:]))
    except (KeyboardInterrupt, BrokenPipeError):
        print("Bye")
        sys.exit(ExitCode.FAILURE)
