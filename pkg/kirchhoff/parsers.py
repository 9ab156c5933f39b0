"""Argument parsers used by CLI"""

# Built-in
import argparse

PKG = __package__.upper()

# =========================================================================
# Parent parsers
# =========================================================================

_config = argparse.ArgumentParser(add_help=False)
_config.add_argument(dest="config", type=str, help="Path to the YAML config")

_seed = argparse.ArgumentParser(add_help=False)
_seed.add_argument(
    "--seed",
    type=int,
    metavar="N",
    help="Override the solver seed of the config.",
)

# =========================================================================
# Interactive mode
# =========================================================================

cmd = argparse.ArgumentParser(
    prog="cmd", description="Start interactive interpreter."
)

# =========================================================================
# Solver commands
# =========================================================================

run = argparse.ArgumentParser(
    prog="run",
    parents=[_config, _seed],
    description=(
        "Validate the configured problem, solve it on the branch, verify "
        "the solution and write solution.csv and report.json."
    ),
)

survey = argparse.ArgumentParser(
    prog="survey",
    parents=[_config],
    description=(
        "Solve the configured problem on a list of branches and write "
        "survey.csv with one row per branch."
    ),
)
survey.add_argument(
    "--branch",
    "-b",
    dest="branches",
    metavar="FORM",
    action="append",
    help=(
        "Branch in compact form, e.g. tan:2, log, singular:1:0.5, "
        "affine:1:0 or table:PATH. Can be used multiple times. "
        "Replaces the survey branches of the config."
    ),
)
survey.add_argument(
    "--empty",
    action="store_true",
    help="Survey an empty branch list (writes the header only).",
)

validate = argparse.ArgumentParser(
    prog="validate",
    parents=[_config],
    description=(
        "Check the domain, coefficient, nonlinearity and branch of a "
        "config without solving."
    ),
)

oracle = argparse.ArgumentParser(
    prog="oracle",
    description=(
        "Reference value t1 = Phi(u1) of the 1D problem -u'' = alpha*u^q "
        "on (0, L), by shooting and from the closed form."
    ),
)
oracle.add_argument(
    "--q", type=float, default=0.5, help="Exponent in (0, 1) (default: %(default)s)"
)
oracle.add_argument(
    "--alpha",
    type=float,
    default=1.0,
    help="Constant coefficient (default: %(default)s)",
)
oracle.add_argument(
    "--length",
    "-L",
    type=float,
    default=1.0,
    help="Interval length (default: %(default)s)",
)
oracle.add_argument(
    "--fine-n",
    type=int,
    metavar="N",
    default=8192,
    help="Sample count of the returned profile, at least 4096 "
    "(default: %(default)s)",
)

# =========================================================================
# Main settings
# =========================================================================

# Build a list of all valid commands
valid_commands = list()
for key, value in globals().copy().items():
    if key.startswith("_"):
        continue
    if not isinstance(value, argparse.ArgumentParser):
        continue
    valid_commands.append(key)

main = argparse.ArgumentParser(prog="python3 -m kirchhoff", add_help=False)
main.add_argument(
    "command",
    type=str,
    nargs="?",
    help=(
        f'Select command: {", ".join(valid_commands)}. '
        "Use with --help to see command arguments."
    ),
)
main.add_argument(
    "-l",
    "--log-level",
    choices=["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"],
    default="INFO",
    help="Logging level (default: %(default)s)",
)
main.add_argument(
    "--output-dir",
    "-o",
    metavar="DIR",
    help=(
        "Directory for the written artifacts. Overrides the output "
        f"section of the config and ${PKG}_OUTPUT_DIR."
    ),
)
