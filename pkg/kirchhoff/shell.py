"""CommandInterpreter based on cmd2"""

# Built-in
import functools
import logging
import math

# PyPI
import cmd2
import rich.console
import rich.table

# Package
import kirchhoff.parsers as parser
import kirchhoff.utils
from kirchhoff.config import RunConfig, default_output_dir
from kirchhoff.errors import ExitCode, KirchhoffError


def exit_status(meth):
    """Record the outcome of a command in self.exit_code"""

    @functools.wraps(meth)
    def wrapper(self, args):
        try:
            self.exit_code = int(meth(self, args))
        except KirchhoffError as error:
            self.log.error("%s: %s", type(error).__name__, error)
            self.exit_code = int(error.exit_code)
        except Exception:
            self.log.exception("Command failed")
            self.exit_code = int(ExitCode.FAILURE)

    return wrapper


def _fmt(value) -> str:
    if isinstance(value, float):
        return "nan" if math.isnan(value) else f"{value:.12g}"
    return str(value)


class CommandInterpreter(cmd2.Cmd):
    """Interpreter for the solver commands"""

    prompt = "kirchhoff> "

    def __init__(self, output_dir=None, **kwargs):
        super().__init__(**kwargs)
        self.console = rich.console.Console()
        self.log = logging.getLogger("Intrpr")
        self.output_dir = output_dir  # None: config or environment decides

    def poutput(self, msg="", *, end: str = "\n", **kwargs) -> None:
        # Override and use rich console
        with self.console.capture() as capture:
            self.console.print(msg, end="", **kwargs)
        super().poutput(capture.get().rstrip("\n"), end=end)

    def do_q(self, line):
        """quit interpreter"""
        return True

    def do_exit(self, line):
        """exit interpreter"""
        return True

    def load(self, path, seed=None) -> RunConfig:
        config = RunConfig.from_file(path, output_dir=self.output_dir)
        if seed is not None:
            config = config.with_seed(seed)
        self.log.debug("Loaded %s (hash %s)", path, config.config_hash)
        return config

    def print_pairs(self, title: str, pairs):
        table = rich.table.Table(title=title, show_header=False)
        table.add_column(style="bold")
        table.add_column()
        for key, value in pairs:
            table.add_row(key, _fmt(value))
        self.poutput(table)

    # -------------------------------------------------------------------------

    @cmd2.with_argparser(parser.run)
    @exit_status
    def do_run(self, args):
        config = self.load(args.config, args.seed)
        outcome = kirchhoff.utils.run(config)
        report = outcome.report
        pairs = [("status", report.get("status"))]
        for key in ("tTilde", "lamTilde", "kirchhoffResidual", "innerSolves"):
            if key in report:
                pairs.append((key, report[key]))
        if "verify" in report:
            pairs.append(("verify", report["verify"]["ok"]))
            ratio = report["verify"]["aprioriRatio"]
            if ratio is not None:
                pairs.append(("aprioriRatio", ratio))
        if "ok" in report.get("saddle", {}):
            pairs.append(("saddle", report["saddle"]["ok"]))
        if "relativeError" in report.get("oracle", {}):
            pairs.append(("oracleError", report["oracle"]["relativeError"]))
        if "diagnostics" in report:
            pairs.append(("message", report["diagnostics"]["message"]))
        pairs.extend(("wrote", path) for path in outcome.paths)
        self.print_pairs(report.get("branch", {}).get("label", "run"), pairs)
        return outcome.exit_code

    # -------------------------------------------------------------------------

    @cmd2.with_argparser(parser.survey)
    @exit_status
    def do_survey(self, args):
        config = self.load(args.config)
        forms = [] if args.empty else args.branches
        outcome = kirchhoff.utils.survey(config, forms)
        table = rich.table.Table(title="Survey")
        for name in ("branch", "tTilde", "lamTilde", "aprioriLhs", "status"):
            table.add_column(name)
        for row in outcome.table.rows:
            table.add_row(
                row.branch,
                _fmt(row.t_tilde),
                _fmt(row.lam_tilde),
                _fmt(row.apriori_lhs),
                row.status,
            )
        self.poutput(table)
        self.poutput(
            f"lhs spread {outcome.report['lhsSpread']:.3g}, "
            f"wrote {outcome.paths[0]}"
        )
        return outcome.exit_code

    # -------------------------------------------------------------------------

    @cmd2.with_argparser(parser.validate)
    @exit_status
    def do_validate(self, args):
        config = self.load(args.config)
        outcome = kirchhoff.utils.validate(config)
        for name, check in outcome.report["checks"].items():
            self.print_pairs(name, check.items())
        self.poutput(f"status: {outcome.report['status']}")
        return outcome.exit_code

    # -------------------------------------------------------------------------

    @cmd2.with_argparser(parser.oracle)
    @exit_status
    def do_oracle(self, args):
        output_dir = self.output_dir or default_output_dir()
        outcome = kirchhoff.utils.oracle(
            args.q, args.alpha, args.length, args.fine_n, output_dir
        )
        report = outcome.report
        self.print_pairs(
            "oracle",
            [
                ("t1Shooting", report["t1Shooting"]),
                ("t1ClosedForm", report["t1ClosedForm"]),
                ("relativeError", report["relativeError"]),
                ("slope", report["shooting"]["slope"]),
                *(("wrote", path) for path in outcome.paths),
            ],
        )
        return outcome.exit_code
