"""Command-line front end.

Every subcommand reads a chain description (a JSON file with ``motif`` and
``repeats``), runs one family of computations and checks, and writes CSV or
JSON data files into ``--out``. Figures are not drawn; the CSV files are the
plot data.

Exit codes: 0 when every check passes, 1 when a check fails, 2 on invalid
input and 3 on a numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import bethe, chain, rsos, scattering, strings, thermo
from .chain import DEFAULT_CAP, ChainSpec
from .errors import DomainError, NumericError

EXIT_OK, EXIT_CHECK, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3
COMMANDS = ("diag", "bethe", "count", "vacuum", "excite", "rsos", "smatrix", "central-charge")
RSOS_SBARS = tuple(Fraction(k, 2) for k in range(1, 8))


@dataclass
class RunConfig:
    """Validated options of one invocation."""

    command: str
    chain_spec_path: Path | None
    output_path: Path
    grid_n: int = thermo.DEFAULT_N
    window: float = thermo.DEFAULT_WINDOW
    tol: float | None = None
    cap: int = DEFAULT_CAP
    context_path: Path | None = None
    M: int | None = None
    max_sum: int = 12
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise DomainError(f"unknown command {self.command!r}")
        if self.grid_n < 2 or self.grid_n & (self.grid_n - 1):
            raise DomainError(f"--grid-n must be a power of two, got {self.grid_n}")
        if not self.window > 0:
            raise DomainError("--window must be positive")
        if self.tol is not None and not self.tol > 0:
            raise DomainError("--tol must be positive")
        if self.cap < 1:
            raise DomainError("--cap must be positive")
        if self.max_sum < 0 or self.max_sum % 2:
            raise DomainError("--max-sum must be a non-negative even integer")
        for p in (self.chain_spec_path, self.context_path):
            if p is not None and not p.is_file():
                raise DomainError(f"no such file: {p}")

    def tolerance(self, default: float) -> float:
        return default if self.tol is None else self.tol

    def load_spec(self) -> ChainSpec:
        if self.chain_spec_path is None:
            raise DomainError(f"{self.command} needs --spec")
        return ChainSpec.from_json(self.chain_spec_path.read_text(), cap=self.cap)

    def load_context(self) -> dict:
        if self.context_path is None:
            raise DomainError(f"{self.command} needs --context")
        try:
            doc = json.loads(self.context_path.read_text())
        except ValueError as exc:
            raise DomainError(f"malformed context: {exc}") from exc
        if not isinstance(doc, dict):
            raise DomainError("context must be a JSON object")
        return doc


# ------------------------------------------------------------------ output


def fmt(x) -> str:
    """12 significant digits; integers and fractions stay exact."""
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer, Fraction, str)):
        return str(x)
    v = float(x)
    if v == 0:
        v = 0.0
    return f"{v:.12g}"


def _atomic_write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path: Path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(x) for x in row])
    _atomic_write(path, buf.getvalue())


def write_json(path: Path, doc):
    _atomic_write(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _workers() -> int:
    raw = os.environ.get("BETHEFORGE_THREADS")
    if raw is None:
        return min(4, os.cpu_count() or 1)
    try:
        n = int(raw)
    except ValueError as exc:
        raise DomainError(f"BETHEFORGE_THREADS must be an integer, got {raw!r}") from exc
    if n < 1:
        raise DomainError("BETHEFORGE_THREADS must be at least 1")
    return n


def _pmap(fn, items):
    """Ordered parallel map."""
    items = list(items)
    n = _workers()
    if n == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))


def _verdict(ok: bool) -> str:
    return "OK" if ok else "FAIL"


# ---------------------------------------------------------------- commands


def cmd_diag(cfg: RunConfig) -> int:
    """Diagonalise ``H^(s)`` and match every constructed Bethe state."""
    spec = cfg.load_spec()
    for s in spec.distinct:
        if spec.sites.count(s) < 2:
            # with a single site of spin s the subleading terms of tau shift dlog(tau)/du at 0
            raise DomainError(f"the energy formula needs at least two sites of spin {s}")
    e_tol = cfg.tolerance(1e-6)
    tau_tol = 1e-7
    spectra = {s: chain.diagonalize(chain.hamiltonian(spec, s), cap=cfg.cap).eigenvalues
               for s in spec.distinct}
    write_csv(cfg.output_path / "spectrum.csv", ["spin", "index", "eigenvalue"],
              [(str(s), k, e) for s in spec.distinct for k, e in enumerate(spectra[s])])

    Ms = [cfg.M] if cfg.M is not None else list(range(int(spec.S0) + 1))
    states = [(M, r) for M in Ms for r in bethe.bethe_states(spec, M)]
    us = [complex(u) for u in np.random.default_rng(7).uniform(0.2, 1.3, 5)]
    ops = {}
    for s in spec.distinct:
        ops[("H", s)] = chain.hamiltonian(spec, s)
        for u in us:
            ops[("t", s, u)] = chain.transfer_matrix(spec, s, u)

    def run(item):
        M, roots = item
        m = bethe.match_state(spec, roots, us, rng=np.random.default_rng(M), ops=dict(ops))
        return M, m, bethe.energy_momentum(spec, roots)

    rows, ok = [], True
    for M, m, em in _pmap(run, states):
        good = m.multiplicity > 0 and m.tau_error < tau_tol and m.energy_error < e_tol
        ok &= good
        roots = " ".join(fmt(z.real) if abs(z.imag) < 1e-12 else f"{fmt(z.real)}{z.imag:+.12g}j"
                         for z in m.roots.roots)
        for s in spec.distinct:
            rows.append((M, str(s), em["E"][s], em["p"], m.tau_error, m.energy_error,
                         m.multiplicity, roots, _verdict(good)))
            print(f"M={M} s={s} E={fmt(em['E'][s])} roots=[{roots}] {_verdict(good)}")
    write_csv(cfg.output_path / "bethe_match.csv",
              ["M", "spin", "energy", "momentum", "tau_error", "energy_error",
               "multiplicity", "roots", "status"], rows)
    print(f"{len(states)} Bethe states matched: {_verdict(ok)}")
    return EXIT_OK if ok else EXIT_CHECK


def cmd_bethe(cfg: RunConfig) -> int:
    """Solve the Bethe equations and tabulate roots, energies and residuals."""
    spec = cfg.load_spec()
    if cfg.M is None:
        raise DomainError("bethe needs --M")
    if not 0 <= cfg.M <= 2 * spec.S0:
        raise DomainError(f"M must lie in 0..{2 * spec.S0}")
    tol = cfg.tolerance(1e-9)
    states = bethe.bethe_states(spec, cfg.M)
    roots_rows, state_rows, ok = [], [], True
    for k, r in enumerate(states):
        res = max((abs(x) for x in bethe.bethe_residual(spec, r.roots)), default=0.0)
        ok &= res < tol
        em = bethe.energy_momentum(spec, r)
        for n, z in enumerate(r.roots):
            roots_rows.append((k, n, z.real, z.imag))
        for s in spec.distinct:
            state_rows.append((k, str(s), em["E"][s], em["p"], res))
        print(f"state {k}: E={' '.join(fmt(em['E'][s]) for s in spec.distinct)} "
              f"p={fmt(em['p'])} residual={res:.3g}")
    write_csv(cfg.output_path / "roots.csv", ["state", "index", "re", "im"], roots_rows)
    write_csv(cfg.output_path / "states.csv", ["state", "spin", "energy", "momentum", "residual"],
              state_rows)
    print(f"{len(states)} states with M={cfg.M}, S={bethe.total_spin(spec, cfg.M)}: {_verdict(ok)}")
    return EXIT_OK if ok else EXIT_CHECK


def cmd_count(cfg: RunConfig) -> int:
    """String-hypothesis state counts against the Hilbert-space dimension."""
    spec = cfg.load_spec()
    table = strings.count_table(spec)
    chk = strings.completeness_check(spec)
    rows = [(M, spec.S0 - M, z) for M, z in table]
    for M, S, z in rows:
        print(f"M={M} S={S} Z={z}")
    write_csv(cfg.output_path / "counts.csv", ["M", "S", "Z"], rows)
    write_json(cfg.output_path / "completeness.json",
               {"sum": chk["sum"], "hilbert_dim": chk["hilbert_dim"], "equal": chk["equal"]})
    print(f"{chk['sum']} = {chk['hilbert_dim']} {_verdict(chk['equal'])}")
    return EXIT_OK if chk["equal"] else EXIT_CHECK


def cmd_vacuum(cfg: RunConfig) -> int:
    """Vacuum energies by two routes and the discretised density equations."""
    spec = cfg.load_spec()
    e_tol = cfg.tolerance(1e-8)
    ok = True
    rows = []
    for s in spec.distinct:
        v = thermo.vacuum_energy(spec, s)
        good = abs(v["closed_form"] - v["numeric"]) < e_tol
        ok &= good
        rows.append((str(s), v["closed_form"], v["numeric"], _verdict(good)))
        print(f"E^({s}) {v['closed_form']:.9g} vs {v['numeric']:.9g} {_verdict(good)}")
    write_csv(cfg.output_path / "vacuum_energy.csv", ["spin", "closed_form", "numeric", "status"], rows)

    grid = thermo.solve_vacuum_integral(spec, thermo.DensityGrid.symmetric(cfg.window, cfg.grid_n))
    lam = grid.lam
    dens_rows = []
    for k, x in enumerate(lam):
        dens_rows.append((x, *(grid.values[s][k] for s in spec.distinct),
                          *(thermo.vacuum_density(spec, s, x) for s in spec.distinct)))
    header = (["lambda"] + [f"sigma_{s}" for s in spec.distinct]
              + [f"exact_{s}" for s in spec.distinct])
    write_csv(cfg.output_path / "densities.csv", header, dens_rows)
    d_tol = 1e-6
    for s in spec.distinct:
        err = float(np.max(np.abs(grid.values[s] - thermo.vacuum_density(spec, s, lam))))
        good = err < d_tol
        ok &= good
        print(f"sigma_{s} sup error {err:.3g} {_verdict(good)}")
    return EXIT_OK if ok else EXIT_CHECK


def _context(spec: ChainSpec, doc: dict):
    holes = doc.get("holes", {})
    new_strings = doc.get("new_strings", {})
    if not isinstance(holes, dict) or not isinstance(new_strings, dict):
        raise DomainError("holes and new_strings must be JSON objects")
    ctx = thermo.make_context(spec, holes, {Fraction(k): v for k, v in new_strings.items()})
    Q = {Fraction(k): [Fraction(q) for q in v] for k, v in doc.get("Q", {}).items()}
    return ctx, Q


def cmd_excite(cfg: RunConfig) -> int:
    """Hole energies, momenta and the dispersion law for a hole configuration."""
    spec = cfg.load_spec()
    ctx, _ = _context(spec, cfg.load_context())
    tol = cfg.tolerance(1e-10)
    ok = True
    rows = []
    for s in spec.distinct:
        disp = thermo.delta_energy_dispersion(spec, ctx, s)
        numeric = thermo.delta_energy_numeric(spec, ctx, s)
        good = disp["dispersion_residual"] < tol and abs(numeric - disp["dE"]) < 1e-8
        ok &= good
        rows.append((str(s), disp["dE"], numeric, disp["dispersion_residual"], _verdict(good)))
        print(f"dE^({s}) {fmt(disp['dE'])} vs {fmt(numeric)} "
              f"dispersion residual {disp['dispersion_residual']:.3g} {_verdict(good)}")
    write_csv(cfg.output_path / "excitation.csv",
              ["spin", "dE_holes", "dE_numeric", "dispersion_residual", "status"], rows)

    hole_rows = []
    for j in sorted(ctx.holes):
        s = spec.distinct[j - 1]
        rho = float(spec.rho(s))
        for d, x in enumerate(ctx.holes[j], start=1):
            hole_rows.append((j, d, x, float(thermo.hole_momentum(rho, x)),
                              float(thermo.hole_energy(x))))
    write_csv(cfg.output_path / "holes.csv", ["sea", "hole", "lambda", "momentum", "energy"],
              hole_rows)

    curve = []
    for s in spec.distinct:
        rho = float(spec.rho(s))
        for x in np.linspace(-4, 4, 161):
            curve.append((str(s), x, float(thermo.hole_momentum(rho, x)),
                          float(thermo.hole_energy(x))))
    write_csv(cfg.output_path / "dispersion.csv", ["spin", "lambda", "momentum", "energy"], curve)
    return EXIT_OK if ok else EXIT_CHECK


def cmd_rsos(cfg: RunConfig) -> int:
    """RSOS path counts against the trigonometric formula."""
    rows = _pmap(lambda sb: rsos.count_table([sb], cfg.max_sum), RSOS_SBARS)
    rows = [r for part in rows for r in part]
    ok = all(r[5] for r in rows)
    for D, Dp, sb, n, f, match in rows:
        print(f"sbar={sb} D={D} Dp={Dp} count={n} formula={f} {'MATCH' if match else 'MISMATCH'}")
    write_csv(cfg.output_path / "rsos_counts.csv",
              ["D", "Dp", "sbar", "count", "formula", "match"], rows)
    print(f"{sum(r[5] for r in rows)}/{len(rows)} MATCH")
    return EXIT_OK if ok else EXIT_CHECK


def cmd_smatrix(cfg: RunConfig) -> int:
    """Phase shifts by both routes and the conjectured S-matrix spectra."""
    spec = cfg.load_spec()
    ctx, Q = _context(spec, cfg.load_context())
    tol = cfg.tolerance(1e-7)
    if ctx.new_strings:
        if not Q:
            raise DomainError("contexts with new strings need quantum numbers Q")
        ctx = scattering.solve_aux_constraints(spec, ctx, Q)
    ok = True
    rows, spec_rows = [], []
    for j in sorted(ctx.holes):
        s = spec.distinct[j - 1]
        for d in range(1, len(ctx.holes[j]) + 1):
            r = scattering.phase_shift(spec, ctx, s, d)
            good = r.residual < tol
            ok &= good
            rows.append((j, d, ctx.holes[j][d - 1], r.phi, r.closed.real, r.closed.imag,
                         r.C, r.residual, _verdict(good)))
            print(f"sea {j} hole {d}: exp(i phi) vs closed residual {r.residual:.3g} "
                  f"{_verdict(good)}")
            try:
                conj = scattering.conjectured_S(spec, ctx, j, d)
            except DomainError as exc:
                print(f"sea {j} hole {d}: no conjectured S-matrix ({exc})", file=sys.stderr)
                continue
            for k, z in enumerate(conj["spectrum"]):
                spec_rows.append((j, d, k, z.real, z.imag))
    write_csv(cfg.output_path / "phases.csv",
              ["sea", "hole", "lambda", "phi", "closed_re", "closed_im", "C", "residual",
               "status"], rows)
    write_csv(cfg.output_path / "smatrix_spectrum.csv", ["sea", "hole", "k", "re", "im"],
              spec_rows)
    write_json(cfg.output_path / "strings.json",
               {str(m): list(v) for m, v in sorted(ctx.new_strings.items())})
    return EXIT_OK if ok else EXIT_CHECK


def cmd_central_charge(cfg: RunConfig) -> int:
    spec = cfg.load_spec()
    c = scattering.central_charge(spec)
    write_json(cfg.output_path / "central_charge.json",
               {"motif": [str(s) for s in spec.motif], "central_charge": str(c)})
    print(f"c = {c}")
    return EXIT_OK


HANDLERS = {
    "diag": cmd_diag, "bethe": cmd_bethe, "count": cmd_count, "vacuum": cmd_vacuum,
    "excite": cmd_excite, "rsos": cmd_rsos, "smatrix": cmd_smatrix,
    "central-charge": cmd_central_charge,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="betheforge", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--spec", type=Path, help="chain JSON: {\"motif\": [...], \"repeats\": n}")
    parser.add_argument("--out", type=Path, default=Path("betheforge-out"),
                        help="output directory")
    parser.add_argument("--grid-n", type=int, default=thermo.DEFAULT_N)
    parser.add_argument("--window", type=float, default=thermo.DEFAULT_WINDOW,
                        help="half-width of the rapidity window")
    parser.add_argument("--tol", type=float, default=None)
    parser.add_argument("--cap", type=int, default=DEFAULT_CAP,
                        help="largest Hilbert-space dimension")
    parser.add_argument("--context", type=Path,
                        help="excitation JSON with holes, new_strings and Q")
    parser.add_argument("--M", type=int, default=None, help="number of Bethe roots")
    parser.add_argument("--max-sum", type=int, default=12, help="largest D + Dp for rsos")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig(args.command, args.spec, args.out, args.grid_n, args.window, args.tol,
                        args.cap, args.context, args.M, args.max_sum)
        return HANDLERS[cfg.command](cfg)
    except (DomainError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (NumericError, ArithmeticError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
