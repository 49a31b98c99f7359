import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, TextIO

from advmc.attack import AttackSynthesizer, verify_robustness
from advmc.models.chain import Dtmc, compose
from advmc.models.results import AttackReport, OptimizerOptions
from advmc.models.threat import ThreatKind, ThreatModel
from advmc.services import harness
from advmc.services.case_studies import GridSpec, gridworld_fig4, random_gridworld, simple_protocol, zeroconf
from advmc.services.checker import sat_prob, sat_prob_all_states
from advmc.services.model_io import (
    load_model,
    load_policy,
    load_threat,
    load_threat_template,
    model_payload,
    store_idtmc,
    store_model,
    store_report,
)
from advmc.services.properties import parse_property
from advmc.services.threats import build_idtmc
from advmc.utils.errors import ModelError
from advmc.utils.logging import get_logger
from advmc.utils.settings import default_seed, default_timeout

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_NOT_ROBUST = 3


@dataclass
class Command:
    name: str
    description: str
    configure: Callable[[argparse.ArgumentParser], None]
    handler: Callable[[argparse.Namespace], int]


def _csv_ints(text: str) -> List[int]:
    return [int(part) for part in text.split(",") if part.strip()]


def _csv_pairs(text: str) -> List[List[int]]:
    """`0-1,0-2` -> [[0, 1], [0, 2]]"""
    pairs = []
    for part in text.split(","):
        if part.strip():
            s, t = part.split("-")
            pairs.append([int(s), int(t)])
    return pairs


def _load_chain(path: str) -> Dtmc:
    model = load_model(path)
    if isinstance(model, Dtmc):
        return model
    policy = load_policy(path)
    if policy is None:
        raise ModelError(f"{path} is an MDP without a policy; a DTMC is needed")
    return compose(model, policy)


def _options(args: argparse.Namespace) -> OptimizerOptions:
    return OptimizerOptions(
        seed=args.seed,
        starts=args.starts,
        max_iterations=args.max_iterations,
        solver=args.solver,
        workers=args.workers,
        timeout_seconds=args.timeout,
    )


def _emit_text(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _emit_rows(columns: List[str], rows: List[dict], out: Optional[str]) -> None:
    if out:
        with open(out, "w", encoding="utf-8", newline="") as handle:
            harness.write_rows(handle, columns, rows)
    else:
        harness.write_rows(sys.stdout, columns, rows)


class CommandRegistry:
    def __init__(self):
        self.commands: Dict[str, Command] = {}
        self.parsers: Dict[str, argparse.ArgumentParser] = {}
        self._register_commands()

    def _register_commands(self):
        """Register every advmc subcommand"""
        self.register(Command("validate", "Check a model file's invariants", self._model_args, self._handle_validate))
        self.register(Command("satprob", "Satisfaction probability of a property", self._satprob_args, self._handle_satprob))
        self.register(Command("attack", "Synthesize a worst-case attack", self._attack_args, self._handle_attack))
        self.register(Command("verify", "Verify adversarial robustness for a delta", self._verify_args, self._handle_verify))
        self.register(Command("max-delta", "Maximal delta for which robustness holds", self._attack_args, self._handle_max_delta))
        self.register(Command("sweep", "Attack over a range of budgets", self._sweep_args, self._handle_sweep))
        self.register(Command("component-sweep", "Per-state delta* with single-state threat models",
                              self._component_args, self._handle_component_sweep))
        self.register(Command("bench", "Direct vs symbolic timings on gridworlds", self._bench_args, self._handle_bench))
        self.register(Command("idtmc", "Export the interval DTMC of a threat model", self._idtmc_args, self._handle_idtmc))
        self.register(Command("casestudy", "Emit a case-study model file", self._casestudy_args, self._handle_casestudy))

    def register(self, command: Command):
        self.commands[command.name] = command

    def list_commands(self) -> List[Dict[str, Any]]:
        return [{"name": c.name, "description": c.description} for c in self.commands.values()]

    def configure(self, subparsers) -> None:
        for command in self.commands.values():
            parser = subparsers.add_parser(command.name, help=command.description, description=command.description)
            command.configure(parser)
            parser.set_defaults(command=command.name)
            self.parsers[command.name] = parser

    def call_command(self, name: str, args: argparse.Namespace) -> int:
        if name not in self.commands:
            raise ValueError(f"Unknown command: {name}")
        logger.debug(f"Running command: {name}")
        return self.commands[name].handler(args)

    def _usage_error(self, name: str, message: str):
        """argparse-style failure (exit 2) for argument combinations argparse cannot express"""
        if name in self.parsers:
            self.parsers[name].error(message)
        raise ValueError(message)

    # Arguments

    @staticmethod
    def _model_args(parser: argparse.ArgumentParser):
        parser.add_argument("model", help="model file (JSON)")

    @staticmethod
    def _common(parser: argparse.ArgumentParser, threat: bool = True):
        parser.add_argument("--prop", required=True, help='property, e.g. "P=? [ F<=10 delivered ]"')
        if threat:
            parser.add_argument("--threat", required=True, help="threat-spec file (JSON)")
        parser.add_argument("--method", choices=["direct", "symbolic", "brute-force"], default="direct")
        parser.add_argument("--seed", type=int, default=default_seed())
        parser.add_argument("--out", help="output file")
        parser.add_argument("--timeout", type=float, default=None, help="seconds")
        parser.add_argument("--starts", type=int, default=5)
        parser.add_argument("--max-iterations", type=int, default=200)
        parser.add_argument("--solver", choices=["pgd", "slsqp"], default="pgd")
        parser.add_argument("--workers", type=int, default=1)

    def _satprob_args(self, parser: argparse.ArgumentParser):
        self._model_args(parser)
        parser.add_argument("--prop", required=True)
        parser.add_argument("--all-states", action="store_true", help="print one probability per state")

    def _attack_args(self, parser: argparse.ArgumentParser):
        self._model_args(parser)
        self._common(parser)
        parser.add_argument("--emit-heatmap", metavar="PREFIX", help="write PREFIX_{original,perturbation,perturbed}.csv")

    def _verify_args(self, parser: argparse.ArgumentParser):
        self._model_args(parser)
        self._common(parser)
        parser.add_argument("--delta", type=float, required=True)

    def _sweep_args(self, parser: argparse.ArgumentParser):
        self._model_args(parser)
        self._common(parser, threat=False)
        parser.add_argument("--threat", help="threat template; its epsilon is replaced per row")
        parser.add_argument("--kind", choices=[k.value for k in ThreatKind])
        parser.add_argument("--states", type=_csv_ints, help="vulnerable states, e.g. 1,3,7")
        parser.add_argument("--transitions", type=_csv_pairs, help="vulnerable transitions, e.g. 0-1,0-2")
        parser.add_argument("--epsilons", required=True, help="0,0.05,0.1 or start:stop:step")

    def _component_args(self, parser: argparse.ArgumentParser):
        self._model_args(parser)
        self._common(parser, threat=False)
        parser.add_argument("--kind", choices=["SS", "SPSS"], required=True)
        parser.add_argument("--epsilon", type=float, required=True)

    @staticmethod
    def _bench_args(parser: argparse.ArgumentParser):
        parser.add_argument("--sizes", type=_csv_ints, default=[5, 10])
        parser.add_argument("--params", type=_csv_ints, default=[5, 10, 20])
        parser.add_argument("--methods", default="direct,symbolic")
        parser.add_argument("--epsilon", type=float, default=0.05)
        parser.add_argument("--timeout", type=float, default=default_timeout())
        parser.add_argument("--seed", type=int, default=default_seed())
        parser.add_argument("--workers", type=int, default=1)
        parser.add_argument("--out")

    def _idtmc_args(self, parser: argparse.ArgumentParser):
        self._model_args(parser)
        parser.add_argument("--threat", required=True)
        parser.add_argument("--out")

    @staticmethod
    def _casestudy_args(parser: argparse.ArgumentParser):
        parser.add_argument("name", choices=["simple", "zeroconf", "gridworld", "gridworld-fig4"])
        parser.add_argument("--n", type=int, default=10, help="zeroconf probe ticks")
        parser.add_argument("--m", type=int, default=50000, help="zeroconf hosts")
        parser.add_argument("--K", type=int, default=65024, help="zeroconf address space")
        parser.add_argument("--p", type=float, help="zeroconf forward probability (required)")
        parser.add_argument("--size", type=int, help="square gridworld with the table layout")
        parser.add_argument("--rows", type=int)
        parser.add_argument("--cols", type=int)
        parser.add_argument("--hazards", type=_csv_ints, default=[])
        parser.add_argument("--goals", type=_csv_ints, default=[])
        parser.add_argument("--slip", type=float, default=0.3)
        parser.add_argument("--seed", type=int, default=default_seed())
        parser.add_argument("--out")

    # Handlers

    def _handle_validate(self, args) -> int:
        model = load_model(args.model)
        if not isinstance(model, Dtmc):
            policy = load_policy(args.model)
            if policy is not None:
                compose(model, policy)
        print("ok")
        return EXIT_OK

    def _handle_satprob(self, args) -> int:
        model = _load_chain(args.model)
        phi = parse_property(args.prop)
        if args.all_states:
            for s, p in enumerate(sat_prob_all_states(model, phi)):
                print(f"{s},{p:.15f}")
        else:
            print(f"{sat_prob(model, phi):.15f}")
        return EXIT_OK

    def _attack(self, args):
        model = _load_chain(args.model)
        tm = load_threat(args.threat)
        phi = parse_property(args.prop)
        result = AttackSynthesizer(_options(args)).run(model, tm, phi, args.method)
        return model, tm, result

    def _handle_attack(self, args) -> int:
        model, tm, result = self._attack(args)
        report = AttackReport.from_result(result, tm, args.prop)
        if args.out:
            store_report(report, args.out)
        else:
            print(report.model_dump_json(indent=2))
        if args.emit_heatmap:
            harness.write_heatmaps(args.emit_heatmap, model, result.x_star)
        logger.info(f"delta*={result.delta_star:.10g} pr_perturbed={result.pr_perturbed:.10g}")
        return EXIT_OK

    def _handle_max_delta(self, args) -> int:
        model, tm, result = self._attack(args)
        if args.emit_heatmap:
            harness.write_heatmaps(args.emit_heatmap, model, result.x_star)
        _emit_text(f"{min(max(result.delta_star, 0.0), 1.0):.15f}\n", args.out)
        return EXIT_OK

    def _handle_verify(self, args) -> int:
        model = _load_chain(args.model)
        tm = load_threat(args.threat)
        outcome = verify_robustness(model, tm, parse_property(args.prop), args.delta, args.method, _options(args))
        print("robust" if outcome.robust else "not robust")
        print(f"delta_star={outcome.attack.delta_star:.15f}")
        if outcome.witness is not None and args.out:
            store_model(outcome.witness, args.out)
        return EXIT_OK if outcome.robust else EXIT_NOT_ROBUST

    def _handle_sweep(self, args) -> int:
        if not (args.threat or args.kind):
            self._usage_error("sweep", "sweep needs --threat or --kind")
        model = _load_chain(args.model)
        epsilons = harness.parse_epsilons(args.epsilons)
        if args.threat:
            template = load_threat_template(args.threat)
            kind, states, transitions = template.kind, template.vulnerable_states, template.vulnerable_transitions
        else:
            kind, states, transitions = ThreatKind(args.kind), args.states, args.transitions
        spec = harness.SweepSpec(
            epsilons=epsilons, kind=kind, vulnerable_states=states, vulnerable_transitions=transitions,
            prop=args.prop, method=args.method, seed=args.seed,
        )
        rows = harness.sweep(model, spec, _options(args), workers=args.workers)
        _emit_rows(harness.SWEEP_COLUMNS, rows, args.out)
        return EXIT_OK

    def _handle_component_sweep(self, args) -> int:
        model = _load_chain(args.model)
        rows = harness.component_rows(model, ThreatKind(args.kind), args.epsilon, args.prop, args.method,
                                      _options(args), workers=args.workers)
        _emit_rows(harness.COMPONENT_COLUMNS, rows, args.out)
        return EXIT_OK

    def _handle_bench(self, args) -> int:
        methods = [m.strip() for m in args.methods.split(",") if m.strip()]
        rows = harness.bench(args.sizes, args.params, methods, epsilon=args.epsilon, timeout=args.timeout,
                             seed=args.seed, workers=args.workers)
        _emit_rows(harness.BENCH_COLUMNS, rows, args.out)
        return EXIT_OK

    def _handle_idtmc(self, args) -> int:
        model = _load_chain(args.model)
        export = build_idtmc(model, load_threat(args.threat))
        if args.out:
            store_idtmc(export, args.out)
        else:
            print(json.dumps(export.model_dump(exclude_none=True), indent=2))
        return EXIT_OK

    def _handle_casestudy(self, args) -> int:
        policy = None
        if args.name == "simple":
            model = simple_protocol()
        elif args.name == "gridworld-fig4":
            model = gridworld_fig4()
        elif args.name == "zeroconf":
            if args.p is None:
                self._usage_error("casestudy", "zeroconf needs --p")
            model = zeroconf(args.n, args.m, args.K, args.p)
        else:
            if args.size:
                spec = GridSpec.table(args.size, seed=args.seed, slip=args.slip)
            else:
                if not (args.rows and args.cols):
                    self._usage_error("casestudy", "gridworld needs --size or --rows and --cols")
                goals = args.goals or [args.rows * args.cols - 1]
                spec = GridSpec(rows=args.rows, cols=args.cols, hazards=args.hazards, goals=goals,
                                slip=args.slip, seed=args.seed)
            model, policy = random_gridworld(spec)
        payload = model_payload(model, policy)
        if args.out:
            store_model(model, args.out, policy)
        else:
            print(json.dumps(payload, indent=2))
        return EXIT_OK
