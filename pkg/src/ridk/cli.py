"""Command-line front end: INI configs, orchestration, on-disk formats.

Configs are INI files with sections [model], [variant], [discretization],
[noise], [reaction] (optional) and [output].  Parsing is strict: unknown
keys and sections are rejected with the offending line, physical
constraints (positivity of gamma, epsilon, dt, ...) are enforced before
anything runs, and the effective config echoes back in a canonical form
that re-parses to an identical RunConfig.

Output contracts (consumed by external renderers, keep bit-exact):
  diagnostics.csv    header t,mass,min_rho,l2_rho,l2_j,energy; one row per
                     recorded step, 17 significant digits.
  snapshot_NNNN.dat  8-byte magic "RIDKSNAP"; little-endian int32 header
                     (dimension, q, n | nx, ny, ndof_rho, ndof_j); one
                     float64 time; rho then j coefficients as little-endian
                     float64.
  meta               "# ridk <version>" comment, one bare seed=N line per
                     executed seed, blank line, then the echoed INI config.
Two-species runs write per-species files (diagnostics_A.csv,
snapshot_B_0003.dat, ...).

Exit codes: 0 success, 1 config/validation failure, 2 numerical failure.
"""

import argparse
import configparser
import sys
from pathlib import Path

import numpy as np
from scipy.integrate import quad

from . import __version__
from .harness import (PRESETS, ExperimentPreset, _linear_profile,
                      _zero_scalar, _zero_vector_2d, compare_particle_vs_ridk,
                      convergence_study, invariant_suite, wrapped_gaussian)
from .mesh import TWO_PI
from .multispecies import CouplingParams, run_two_species
from .noise import (CounterStream, TruncationSet, VonMisesSpectrum,
                    eigenvalue, mode_basis, sample_increment, truncation_set)
from .particles import (ReactionParams, langevin_step, react,
                        sample_gaussian_species)
from .potential import parse_potential
from .solver import Base, ExtraDiffusion, RidkParams, TimeScaleSwitch, run

SNAPSHOT_MAGIC = b"RIDKSNAP"

_SCHEMA = {
    "model": ("preset", "gamma", "sigma", "epsilon", "n_particles", "delta",
              "kbt", "potential"),
    "variant": ("kind", "d0", "tau"),
    "discretization": ("dimension", "q", "n", "nx", "ny", "dt", "t_end"),
    "noise": ("truncation", "seed"),
    "reaction": ("kappa", "radius", "rho_th", "counts", "mu_a", "mu_b",
                 "spread_a", "spread_b"),
    "output": ("directory", "snapshot_times", "grid"),
}

# Defaults mirror the canonical single-species experiment constants; keys
# whose default depends on the dimension (n vs nx/ny, dt) are filled during
# validation once the dimension is known.
_DEFAULTS = {
    "model": {"gamma": "0.25", "sigma": "0.25", "epsilon": "0.05",
              "n_particles": "1000", "delta": "1e-4", "potential": "none"},
    "variant": {"kind": "base"},
    "discretization": {"dimension": "1", "q": "0", "t_end": "1.0"},
    "noise": {"truncation": "auto", "seed": "0"},
    "output": {"directory": "out", "snapshot_times": "", "grid": "400"},
}
_REACTION_DEFAULTS = {"kappa": "0.2", "radius": "0.15", "rho_th": "0.012"}
_REACTION_REQUIRED = ("counts", "mu_a", "mu_b", "spread_a", "spread_b")


class ConfigError(Exception):
    """Invalid configuration; the message names the offending [section] key."""


def _fail(section, key, message, line=None):
    where = f"[{section}] {key}" if key else f"[{section}]"
    if line is not None:
        message = f"{message} (line {line})"
    raise ConfigError(f"{where}: {message}")


# -- config model --------------------------------------------------------------

class RunConfig:
    """Fully validated configuration with typed values per section.

    sections maps section name to an ordered dict of typed values (floats,
    ints, tuples, or canonical strings such as "auto").  Two configs are
    equal when their typed sections agree, so parse(echo(cfg)) == cfg is
    the round-trip contract.
    """

    def __init__(self, sections):
        self.sections = sections

    def __eq__(self, other):
        return isinstance(other, RunConfig) and self.sections == other.sections

    def __ne__(self, other):
        return not self.__eq__(other)

    @property
    def two_species(self):
        return "reaction" in self.sections

    def echo(self):
        """Canonical INI rendering; floats use repr so values round-trip."""
        lines = []
        for section, values in self.sections.items():
            lines.append(f"[{section}]")
            for key, value in values.items():
                lines.append(f"{key} = {_render_value(value)}")
            lines.append("")
        return "\n".join(lines)


def _render_value(value):
    if isinstance(value, tuple):
        return ", ".join(_render_value(v) for v in value)
    if isinstance(value, bool):
        raise TypeError("no boolean config values")
    if isinstance(value, float):
        return repr(value)
    return str(value)


def render_meta(cfg, seeds):
    """Meta file: version comment, bare seed=N lines, then the INI echo."""
    head = [f"# ridk {__version__}"]
    head.extend(f"seed={int(s)}" for s in seeds)
    return "\n".join(head) + "\n\n" + cfg.echo()


# -- parsing -------------------------------------------------------------------

def _split_seed_lines(text):
    """Peel bare seed=N records above the first section header.

    render_meta writes them there so meta files re-parse directly; inside a
    section "seed" is an ordinary [noise] key.  Stripped lines are blanked,
    not removed, so reported line numbers match the original text.
    """
    seeds = []
    kept = []
    in_head = True
    for line in text.splitlines():
        stripped = line.strip()
        if in_head and stripped.startswith("seed=") :
            value = stripped[len("seed="):].strip()
            try:
                seeds.append(int(value, 10))
            except ValueError:
                raise ConfigError(f"malformed seed line: {stripped!r}")
            kept.append("")
            continue
        if stripped and not stripped.startswith(("#", ";")):
            in_head = False
        kept.append(line)
    return seeds, "\n".join(kept)


def _scan_positions(body):
    """Map (section, key) -> 1-based line of first occurrence.

    configparser does not report key positions, so errors re-locate keys
    with this pre-pass.  Section headers are stored under key None.
    """
    positions = {}
    section = None
    for lineno, line in enumerate(body.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith(("#", ";")):
            continue
        if stripped.startswith("[") and stripped.endswith("]"):
            section = stripped[1:-1].strip()
            positions.setdefault((section, None), lineno)
            continue
        # indented lines are configparser continuations, not new keys
        if section is not None and "=" in stripped and not line[:1].isspace():
            key = stripped.split("=", 1)[0].strip().lower()
            positions.setdefault((section, key), lineno)
    return positions


def _read_ini(body):
    parser = configparser.ConfigParser(delimiters=("=",), interpolation=None,
                                       strict=True)
    try:
        parser.read_string(body)
    except configparser.DuplicateOptionError as exc:
        raise ConfigError(f"[{exc.section}] {exc.option}: duplicate key "
                          f"(line {exc.lineno})")
    except configparser.DuplicateSectionError as exc:
        raise ConfigError(f"[{exc.section}]: duplicate section "
                          f"(line {exc.lineno})")
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError(f"line {exc.lineno}: keys must appear under a "
                          "[section] header")
    except configparser.Error as exc:
        raise ConfigError(str(exc).replace("\n", " "))
    return parser


def _parse_override(item):
    head, eq, value = item.partition("=")
    if not eq:
        raise ConfigError(f"--override takes section.key=value, got {item!r}")
    section, dot, key = head.partition(".")
    section, key = section.strip(), key.strip().lower()
    if not dot or not section or not key:
        raise ConfigError(f"--override takes section.key=value, got {item!r}")
    if section not in _SCHEMA:
        raise ConfigError(f"--override: [{section}]: unknown section")
    if key not in _SCHEMA[section]:
        raise ConfigError(f"--override: [{section}] {key}: unknown key")
    if (section, key) == ("model", "preset"):
        raise ConfigError("--override cannot select a preset; use --preset")
    return section, key, value.strip()


def _preset_strings(name):
    """Render a named experiment preset as raw section/key strings.

    Expansion happens at the string layer so presets pass through exactly
    the same validation as hand-written files.
    """
    preset = PRESETS[name]()
    params = preset.params
    model = {
        "gamma": repr(params.gamma),
        "sigma": repr(params.sigma),
        "epsilon": repr(params.eps),
        "n_particles": str(int(params.n_particles)),
        "delta": repr(params.delta),
        "potential": (params.potential.expression
                      if params.potential is not None else "none"),
    }
    if params.sigma == 0.0:
        model["kbt"] = repr(params.kbt)
    if isinstance(preset.variant, ExtraDiffusion):
        variant = {"kind": "extra-diffusion", "d0": repr(preset.variant.d0)}
    elif isinstance(preset.variant, TimeScaleSwitch):
        variant = {"kind": "time-scale", "tau": repr(preset.variant.tau)}
    else:
        variant = {"kind": "base"}
    disc = {"dimension": str(preset.dimension), "q": str(preset.q)}
    if preset.dimension == 1:
        disc["n"] = str(int(preset.resolution))
    else:
        disc["nx"] = str(int(preset.resolution[0]))
        disc["ny"] = str(int(preset.resolution[1]))
    disc["dt"] = repr(preset.grid[0])
    disc["t_end"] = repr(preset.grid[1])
    sections = {
        "model": model,
        "variant": variant,
        "discretization": disc,
        "noise": {"truncation": "auto", "seed": str(preset.seeds[0])},
        "output": {"snapshot_times": ", ".join(repr(float(s))
                                               for s in preset.snapshot_times)},
    }
    if preset.two_species:
        c = preset.coupling
        sections["reaction"] = {
            "kappa": repr(c.kappa),
            "radius": repr(c.radius),
            "rho_th": repr(c.rho_th),
            "counts": ", ".join(str(int(v)) for v in preset.particle_counts),
            "mu_a": ", ".join(repr(float(v)) for v in preset.particle_means[0]),
            "mu_b": ", ".join(repr(float(v)) for v in preset.particle_means[1]),
            "spread_a": repr(float(preset.particle_spreads[0])),
            "spread_b": repr(float(preset.particle_spreads[1])),
        }
    return sections


def parse_config(text, overrides=(), preset=None):
    """Parse and validate an INI config into a RunConfig.

    Validation stops at the first error and reports "[section] key: reason"
    with the line number when the key came from the text.  Expansion order:
    defaults, then the named preset (the preset flag wins over a preset key
    in the text), then the file's own keys, then overrides.
    """
    seeds, body = _split_seed_lines(text)
    positions = _scan_positions(body)
    parser = _read_ini(body)

    for (section, key), line in sorted(positions.items(),
                                       key=lambda item: item[1]):
        if section not in _SCHEMA:
            raise ConfigError(f"[{section}]: unknown section (line {line})")
        if key is not None and key not in _SCHEMA[section]:
            _fail(section, key, "unknown key", line)

    raw = {section: dict(values) for section, values in _DEFAULTS.items()}
    preset_name = preset
    if preset_name is None and parser.has_option("model", "preset"):
        preset_name = parser.get("model", "preset").strip()
    if preset_name is not None:
        if preset_name not in PRESETS:
            _fail("model", "preset",
                  f"unknown preset {preset_name!r}; choose from "
                  f"{', '.join(sorted(PRESETS))}",
                  positions.get(("model", "preset")))
        for section, values in _preset_strings(preset_name).items():
            raw.setdefault(section, {}).update(values)
        raw["model"]["preset"] = preset_name

    for section in parser.sections():
        target = raw.setdefault(section, {})
        for key, value in parser.items(section):
            target[key] = value.strip()
    if preset_name is not None:
        # the flag wins over a preset key in the text
        raw["model"]["preset"] = preset_name

    user_set = {pos for pos in positions if pos[1] is not None}
    for item in overrides:
        section, key, value = _parse_override(item)
        raw.setdefault(section, {})[key] = value
        user_set.add((section, key))

    if "reaction" in raw:
        for key, value in _REACTION_DEFAULTS.items():
            raw["reaction"].setdefault(key, value)

    return _build_config(raw, positions, user_set)


def _build_config(raw, positions, user_set):
    def bad(section, key, message):
        _fail(section, key, message, positions.get((section, key)))

    def number(section, key):
        text = raw[section][key]
        try:
            return float(text)
        except ValueError:
            bad(section, key, f"expected a number, got {text!r}")

    def integer(section, key):
        text = raw[section][key]
        try:
            return int(text, 10)
        except ValueError:
            bad(section, key, f"expected an integer, got {text!r}")

    def float_list(section, key):
        text = raw[section][key].strip()
        if not text:
            return ()
        try:
            return tuple(float(tok) for tok in text.split(","))
        except ValueError:
            bad(section, key, f"expected comma-separated numbers, got {text!r}")

    # [model]
    m = raw["model"]
    model = {}
    if "preset" in m:
        model["preset"] = m["preset"]
    gamma = number("model", "gamma")
    if gamma < 0:
        bad("model", "gamma", "must be nonnegative")
    sigma = number("model", "sigma")
    if sigma < 0:
        bad("model", "sigma", "must be nonnegative")
    if sigma > 0 and gamma == 0:
        bad("model", "gamma", "must be positive when sigma > 0")
    epsilon = number("model", "epsilon")
    if epsilon <= 0:
        bad("model", "epsilon", "must be positive")
    n_particles = integer("model", "n_particles")
    if n_particles <= 0:
        bad("model", "n_particles", "must be positive")
    delta = number("model", "delta")
    if delta < 0:
        bad("model", "delta", "must be nonnegative")
    model.update(gamma=gamma, sigma=sigma, epsilon=epsilon,
                 n_particles=n_particles, delta=delta)
    if "kbt" in m:
        if sigma > 0:
            bad("model", "kbt",
                "is derived as sigma^2/(2 gamma) when sigma > 0; remove it")
        kbt = number("model", "kbt")
        if kbt <= 0:
            bad("model", "kbt", "must be positive")
        model["kbt"] = kbt
    elif sigma == 0:
        bad("model", "kbt", "required when sigma = 0")

    # [discretization] comes before the potential: its grammar needs the
    # dimension to know whether y is a valid symbol.
    d = raw["discretization"]
    dimension = integer("discretization", "dimension")
    if dimension not in (1, 2):
        bad("discretization", "dimension", "must be 1 or 2")
    q = integer("discretization", "q")
    if q < 0:
        bad("discretization", "q", "must be nonnegative")
    if dimension == 2 and q != 0:
        bad("discretization", "q", "two-dimensional runs support q = 0 only")
    disc = {"dimension": dimension, "q": q}
    if dimension == 1:
        for alien in ("nx", "ny"):
            if ("discretization", alien) in user_set:
                bad("discretization", alien, "not valid when dimension = 1; use n")
        d.setdefault("n", "256")
        n = integer("discretization", "n")
        if n < 2:
            bad("discretization", "n", "must be at least 2")
        disc["n"] = n
        d.setdefault("dt", "1e-3")
    else:
        if ("discretization", "n") in user_set:
            bad("discretization", "n", "not valid when dimension = 2; use nx and ny")
        d.setdefault("nx", "32")
        d.setdefault("ny", "32")
        nx = integer("discretization", "nx")
        ny = integer("discretization", "ny")
        if nx < 2:
            bad("discretization", "nx", "must be at least 2")
        if ny < 2:
            bad("discretization", "ny", "must be at least 2")
        disc["nx"] = nx
        disc["ny"] = ny
        d.setdefault("dt", "1e-2")
    dt = number("discretization", "dt")
    if dt <= 0:
        bad("discretization", "dt", "must be positive")
    t_end = number("discretization", "t_end")
    if t_end <= 0:
        bad("discretization", "t_end", "must be positive")
    nsteps = int(round(t_end / dt))
    if nsteps < 1 or abs(nsteps * dt - t_end) > 1e-9 * max(t_end, 1.0):
        bad("discretization", "dt", f"must divide t_end = {t_end!r}")
    disc["dt"] = dt
    disc["t_end"] = t_end

    pot_text = m.get("potential", "none").strip() or "none"
    if pot_text != "none":
        try:
            parse_potential(pot_text, dimension)
        except ValueError as exc:
            bad("model", "potential", str(exc))
    model["potential"] = pot_text

    # [variant]
    v = raw["variant"]
    kind = v.get("kind", "base").strip()
    variant = {"kind": kind}
    if kind == "extra-diffusion":
        if ("variant", "tau") in user_set:
            bad("variant", "tau", "not valid for kind = extra-diffusion")
        v.setdefault("d0", "0.5")
        d0 = number("variant", "d0")
        if d0 <= 0:
            bad("variant", "d0", "must be positive")
        variant["d0"] = d0
    elif kind == "time-scale":
        if ("variant", "d0") in user_set:
            bad("variant", "d0", "not valid for kind = time-scale")
        v.setdefault("tau", "0.2")
        tau = number("variant", "tau")
        if tau <= 0:
            bad("variant", "tau", "must be positive")
        variant["tau"] = tau
    elif kind == "base":
        for alien in ("d0", "tau"):
            if ("variant", alien) in user_set:
                bad("variant", alien, "not valid for kind = base")
    else:
        bad("variant", "kind",
            f"must be base, extra-diffusion or time-scale, got {kind!r}")

    # [noise]
    nz = raw["noise"]
    trunc_text = nz.get("truncation", "auto").strip()
    if trunc_text == "auto":
        truncation = "auto"
    else:
        try:
            truncation = int(trunc_text, 10)
        except ValueError:
            bad("noise", "truncation",
                f"must be auto or a positive integer, got {trunc_text!r}")
        if truncation <= 0:
            bad("noise", "truncation", "fixed mode count must be positive")
    nz.setdefault("seed", "0")
    seed = integer("noise", "seed")
    if seed < 0:
        bad("noise", "seed", "must be nonnegative")
    noise_section = {"truncation": truncation, "seed": seed}

    # [reaction] (optional)
    reaction = None
    if "reaction" in raw:
        r = raw["reaction"]
        for required in _REACTION_REQUIRED:
            if required not in r:
                bad("reaction", required, "missing required key")
        kappa = number("reaction", "kappa")
        if kappa < 0:
            bad("reaction", "kappa", "must be nonnegative")
        radius = number("reaction", "radius")
        if not 0.0 < radius < np.pi:
            bad("reaction", "radius", "must lie in (0, pi)")
        rho_th = number("reaction", "rho_th")
        if rho_th < 0:
            bad("reaction", "rho_th", "must be nonnegative")
        counts_raw = float_list("reaction", "counts")
        counts = tuple(int(c) for c in counts_raw)
        if len(counts) != 2 or any(c != rc for c, rc in zip(counts, counts_raw)):
            bad("reaction", "counts", "expected two integers")
        if any(c < 0 for c in counts):
            bad("reaction", "counts", "must be nonnegative")
        if sum(counts) != n_particles:
            bad("reaction", "counts",
                f"must sum to n_particles = {n_particles}")
        mu_a = float_list("reaction", "mu_a")
        if len(mu_a) != dimension:
            bad("reaction", "mu_a", f"needs {dimension} component(s)")
        mu_b = float_list("reaction", "mu_b")
        if len(mu_b) != dimension:
            bad("reaction", "mu_b", f"needs {dimension} component(s)")
        spread_a = number("reaction", "spread_a")
        if spread_a <= 0:
            bad("reaction", "spread_a", "must be positive")
        spread_b = number("reaction", "spread_b")
        if spread_b <= 0:
            bad("reaction", "spread_b", "must be positive")
        if truncation != "auto":
            bad("noise", "truncation",
                "fixed truncation supports single-species runs only")
        reaction = {"kappa": kappa, "radius": radius, "rho_th": rho_th,
                    "counts": counts, "mu_a": mu_a, "mu_b": mu_b,
                    "spread_a": spread_a, "spread_b": spread_b}

    # [output]
    o = raw["output"]
    directory = o.get("directory", "out").strip()
    if not directory:
        bad("output", "directory", "must be nonempty")
    grid = integer("output", "grid")
    if grid < 2:
        bad("output", "grid", "must be at least 2")
    snapshot_times = float_list("output", "snapshot_times")
    for s in snapshot_times:
        if s < 0 or s > t_end * (1 + 1e-12):
            bad("output", "snapshot_times",
                f"time {s!r} lies outside [0, t_end]")
        k = int(round(s / dt))
        if abs(k * dt - s) > 1e-9:
            bad("output", "snapshot_times",
                f"time {s!r} is not a multiple of dt")
    if any(b <= a for a, b in zip(snapshot_times, snapshot_times[1:])):
        bad("output", "snapshot_times", "must be strictly increasing")
    output = {"directory": directory, "snapshot_times": snapshot_times,
              "grid": grid}

    sections = {"model": model, "variant": variant, "discretization": disc,
                "noise": noise_section}
    if reaction is not None:
        sections["reaction"] = reaction
    sections["output"] = output
    return RunConfig(sections)


# -- plan construction ---------------------------------------------------------

def _default_init(dimension):
    if dimension == 1:
        return (_linear_profile, _zero_scalar)
    flat = 1.0 / TWO_PI ** 2
    return (lambda x, y: np.full(np.shape(np.asarray(x, dtype=float)), flat),
            _zero_vector_2d)


def build_run_plan(cfg):
    """Materialize a validated config as a runnable ExperimentPreset."""
    s = cfg.sections
    m, d, v, o = s["model"], s["discretization"], s["variant"], s["output"]
    dimension = d["dimension"]
    potential = parse_potential(
        None if m["potential"] == "none" else m["potential"], dimension)
    params = RidkParams(m["gamma"], m["sigma"], m["epsilon"],
                        m["n_particles"], delta=m["delta"],
                        potential=potential, kbt=m.get("kbt"))
    if v["kind"] == "extra-diffusion":
        variant = ExtraDiffusion(v["d0"])
    elif v["kind"] == "time-scale":
        variant = TimeScaleSwitch(v["tau"])
    else:
        variant = Base()
    resolution = d["n"] if dimension == 1 else (d["nx"], d["ny"])
    grid = (d["dt"], d["t_end"])
    name = m.get("preset", "custom")
    seeds = (s["noise"]["seed"],)
    snapshot_times = o["snapshot_times"]
    if "reaction" in s:
        r = s["reaction"]
        total = float(m["n_particles"])
        zero_j = _zero_vector_2d if dimension == 2 else _zero_scalar
        init_a = (wrapped_gaussian(r["mu_a"], r["spread_a"],
                                   mass=r["counts"][0] / total, dim=dimension),
                  zero_j)
        init_b = (wrapped_gaussian(r["mu_b"], r["spread_b"],
                                   mass=r["counts"][1] / total, dim=dimension),
                  zero_j)
        coupling = CouplingParams(r["kappa"], r["radius"], m["n_particles"],
                                  r["rho_th"])
        return ExperimentPreset(name, dimension, d["q"], resolution, params,
                                variant, grid, snapshot_times, seeds,
                                init_a=init_a, init_b=init_b,
                                coupling=coupling,
                                particle_counts=r["counts"],
                                particle_means=(r["mu_a"], r["mu_b"]),
                                particle_spreads=(r["spread_a"],
                                                  r["spread_b"]))
    return ExperimentPreset(name, dimension, d["q"], resolution, params,
                            variant, grid, snapshot_times, seeds,
                            init=_default_init(dimension))


# -- output formats ------------------------------------------------------------

def format_diagnostics(output):
    """CSV text for one run: t,mass,min_rho,l2_rho,l2_j,energy per step."""
    rows = ["t,mass,min_rho,l2_rho,l2_j,energy"]
    for k in range(len(output.times)):
        rows.append(",".join("%.17g" % v for v in
                             (output.times[k], output.mass[k],
                              output.min_rho[k], output.l2_rho[k],
                              output.l2_j[k], output.energy[k])))
    return "\n".join(rows) + "\n"


def write_snapshot(path, pair, t):
    """Binary snapshot of one state pair; layout in the module docstring."""
    rho_space = pair.rho.space
    mesh = rho_space.mesh
    header = [mesh.d, rho_space.q, *[int(s) for s in mesh.shape],
              pair.rho.coeffs.size, pair.j.coeffs.size]
    blob = (SNAPSHOT_MAGIC
            + np.asarray(header, dtype="<i4").tobytes()
            + np.asarray([t], dtype="<f8").tobytes()
            + np.ascontiguousarray(pair.rho.coeffs, dtype="<f8").tobytes()
            + np.ascontiguousarray(pair.j.coeffs, dtype="<f8").tobytes())
    Path(path).write_bytes(blob)


def read_snapshot(path):
    """Parse a snapshot file back into plain arrays.

    Returns a dict with dimension, q, shape, t, rho and j coefficient
    arrays.  Raises ValueError naming the file on any malformation.
    """
    data = Path(path).read_bytes()
    if len(data) < 8 or data[:8] != SNAPSHOT_MAGIC:
        raise ValueError(f"{path}: not a snapshot file (bad magic)")

    def ints(offset, count):
        end = offset + 4 * count
        if end > len(data):
            raise ValueError(f"{path}: truncated header")
        return np.frombuffer(data[offset:end], dtype="<i4"), end

    head, pos = ints(8, 2)
    dimension, q = int(head[0]), int(head[1])
    if dimension not in (1, 2):
        raise ValueError(f"{path}: bad dimension {dimension}")
    if q < 0:
        raise ValueError(f"{path}: bad polynomial degree {q}")
    shape, pos = ints(pos, dimension)
    dofs, pos = ints(pos, 2)
    ndof_rho, ndof_j = int(dofs[0]), int(dofs[1])
    if ndof_rho <= 0 or ndof_j <= 0:
        raise ValueError(f"{path}: bad dof counts {ndof_rho}, {ndof_j}")
    if pos + 8 > len(data):
        raise ValueError(f"{path}: truncated header")
    t = float(np.frombuffer(data[pos:pos + 8], dtype="<f8")[0])
    pos += 8
    expected = pos + 8 * (ndof_rho + ndof_j)
    if len(data) != expected:
        raise ValueError(f"{path}: expected {expected} bytes, found {len(data)}")
    rho = np.frombuffer(data[pos:pos + 8 * ndof_rho], dtype="<f8").copy()
    pos += 8 * ndof_rho
    j = np.frombuffer(data[pos:], dtype="<f8").copy()
    return {"dimension": dimension, "q": q,
            "shape": tuple(int(s) for s in shape), "t": t, "rho": rho, "j": j}


def _prepare_outdir(cfg):
    outdir = Path(cfg.sections["output"]["directory"])
    outdir.mkdir(parents=True, exist_ok=True)
    return outdir


# -- commands ------------------------------------------------------------------

def _cmd_run(cfg, args):
    plan = build_run_plan(cfg)
    outdir = _prepare_outdir(cfg)
    seed = cfg.sections["noise"]["seed"]
    truncation = cfg.sections["noise"]["truncation"]
    sys.stdout.write(cfg.echo())
    if plan.two_species:
        out = run_two_species(plan.build_space(), plan.params, plan.variant,
                              plan.coupling, plan.init_a, plan.init_b,
                              plan.grid, seed, plan.snapshot_times)
        for label, single in (("A", out.a), ("B", out.b)):
            (outdir / f"diagnostics_{label}.csv").write_text(
                format_diagnostics(single))
            for k, (t, pair) in enumerate(single.snapshots):
                write_snapshot(outdir / f"snapshot_{label}_{k:04d}.dat",
                               pair, t)
        total = out.a.mass[-1] + out.b.mass[-1]
        print(f"final masses: A {out.a.mass[-1]:.12g}, "
              f"B {out.b.mass[-1]:.12g}, total {total:.12g}")
        print(f"min rho over run: A {np.min(out.a.min_rho):.6g}, "
              f"B {np.min(out.b.min_rho):.6g}")
    else:
        space = plan.build_space()
        noise_factory = None
        if truncation != "auto" and plan.params.sigma > 0:
            # fixed mode count overrides the resolution-coupled default J
            spectrum = VonMisesSpectrum(plan.params.eps, space.mesh.d)
            tset = TruncationSet(int(truncation))
            stream = CounterStream(seed)
            noise_factory = lambda k, step_dt: sample_increment(
                spectrum, tset, step_dt, stream)
        out = run(space, plan.params, plan.variant, plan.init, plan.grid,
                  seed, plan.snapshot_times, noise_factory=noise_factory)
        (outdir / "diagnostics.csv").write_text(format_diagnostics(out))
        for k, (t, pair) in enumerate(out.snapshots):
            write_snapshot(outdir / f"snapshot_{k:04d}.dat", pair, t)
        print(f"final mass {out.mass[-1]:.12g}, "
              f"min rho over run {np.min(out.min_rho):.6g}")
    (outdir / "meta").write_text(render_meta(cfg, (seed,)))
    print(f"outputs written to {outdir}")
    return 0


def _cmd_convergence(cfg, args):
    try:
        levels = tuple(int(tok, 10) for tok in args.levels.split(","))
    except ValueError:
        raise ConfigError(
            f"--levels: expected comma-separated integers, got {args.levels!r}")
    if cfg.sections["discretization"]["dimension"] != 1:
        raise ConfigError("[discretization] dimension: convergence studies "
                          "run in one dimension")
    m = cfg.sections["model"]
    if m["gamma"] <= 0:
        raise ConfigError("[model] gamma: convergence studies need gamma > 0")
    kbt = m["kbt"] if m["sigma"] == 0 else \
        m["sigma"] ** 2 / (2.0 * m["gamma"])
    sys.stdout.write(cfg.echo())
    try:
        report = convergence_study(args.kind, cfg.sections["discretization"]["q"],
                                   levels, kbt=kbt, gamma=m["gamma"])
    except ValueError as exc:
        raise ConfigError(f"--levels: {exc}")
    outdir = _prepare_outdir(cfg)
    rows = ["n,error"]
    for n, err in zip(report.resolutions, report.errors):
        rows.append("%d,%.17g" % (n, err))
        print(f"n = {n:5d}: error {err:.6e}")
    (outdir / "convergence.csv").write_text("\n".join(rows) + "\n")
    (outdir / "meta").write_text(render_meta(cfg, ()))
    if report.exact:
        print("errors at rounding level; order exact")
    else:
        print(f"fitted order {report.slope:.3f} "
              f"(target {report.target_order:g})")
    if not report.monotone and not report.exact:
        print("warning: error sequence is not monotone")
    ok = report.meets_target()
    print(("PASS" if ok else "FAIL") + f" {args.kind} order target")
    print(f"outputs written to {outdir}")
    return 0 if ok else 2


def _lambda_quadrature(eps, j):
    """Spectral coefficient by direct quadrature of the kernel cosine moment."""
    f = lambda x: np.exp(-np.sin(0.5 * x) ** 2 / (eps * eps))
    num, _ = quad(f, -np.pi, np.pi, weight="cos", wvar=j, limit=400)
    den, _ = quad(f, -np.pi, np.pi, points=[0.0], limit=400)
    return num / den


_COVARIANCE_PAIRS = ((0.0, 0.0), (0.7, 2.1), (3.0, 3.1), (0.3, 5.9),
                     (1.2, 4.4))


def _cmd_noise_check(cfg, args):
    eps = cfg.sections["model"]["epsilon"]
    seed = cfg.sections["noise"]["seed"]
    nsamp = args.samples
    if nsamp < 100:
        raise ConfigError("--samples: need at least 100 for the 4-sigma test")
    sys.stdout.write(cfg.echo())
    outdir = _prepare_outdir(cfg)

    rows = ["j,recurrence,quadrature,abs_diff"]
    worst = 0.0
    lam0 = eigenvalue(0, eps)
    for j in range(51):
        lam = eigenvalue(j, eps)
        ref = _lambda_quadrature(eps, j)
        diff = abs(lam - ref)
        worst = max(worst, diff)
        rows.append("%d,%.17g,%.17g,%.17g" % (j, lam, ref, diff))
    (outdir / "noise_check.csv").write_text("\n".join(rows) + "\n")
    spectrum_ok = worst <= 1e-8 and lam0 == 1.0
    print(f"eigenvalues vs quadrature, j <= 50: max |diff| = {worst:.3e} "
          f"(tol 1e-08), lambda_0 = {lam0!r}")

    # Monte Carlo covariance of the sampled increments at fixed point pairs;
    # the estimator of E[X Y] for jointly Gaussian X, Y has variance
    # (var X var Y + cov^2)/nsamp, tested at four standard errors.
    spectrum = VonMisesSpectrum(eps, 1)
    tset = truncation_set(eps, 0.1, 0.5)
    points = np.array(sorted({x for pair in _COVARIANCE_PAIRS for x in pair}),
                      dtype=float)[:, None]
    index = {x: i for i, x in enumerate(points[:, 0])}
    modes = tset.indices(1)
    lam = spectrum.eigenvalues(modes)
    basis = mode_basis(modes, points)
    dt = 1.0
    stream = CounterStream(seed)
    samples = np.empty((nsamp, len(points)))
    for k in range(nsamp):
        inc = sample_increment(spectrum, tset, dt, stream)
        samples[k] = inc.evaluate(points)[:, 0]

    cov_rows = ["x,y,exact,estimate,stderr"]
    cov_ok = True
    for x, y in _COVARIANCE_PAIRS:
        i, jdx = index[x], index[y]
        exact = dt * float(np.sum(lam * basis[i] * basis[jdx]))
        estimate = float(np.mean(samples[:, i] * samples[:, jdx]))
        var_x = dt * float(np.sum(lam * basis[i] ** 2))
        var_y = dt * float(np.sum(lam * basis[jdx] ** 2))
        stderr = float(np.sqrt((var_x * var_y + exact ** 2) / nsamp))
        ok = abs(estimate - exact) <= 4.0 * stderr
        cov_ok = cov_ok and ok
        cov_rows.append("%.17g,%.17g,%.17g,%.17g,%.17g"
                        % (x, y, exact, estimate, stderr))
        print(f"cov({x:3.1f},{y:3.1f}): exact {exact: .6e}, "
              f"estimate {estimate: .6e}, |diff|/se "
              f"{abs(estimate - exact) / stderr:4.2f}  "
              + ("PASS" if ok else "FAIL"))
    (outdir / "covariance.csv").write_text("\n".join(cov_rows) + "\n")
    (outdir / "meta").write_text(render_meta(cfg, (seed,)))
    print(("PASS" if spectrum_ok else "FAIL") + " eigenvalue table")
    print(("PASS" if cov_ok else "FAIL")
          + f" covariance Monte Carlo ({nsamp} samples, 4 se)")
    print(f"outputs written to {outdir}")
    return 0 if spectrum_ok and cov_ok else 2


def _cmd_particles(cfg, args):
    plan = build_run_plan(cfg)
    if not plan.two_species:
        raise ConfigError("[reaction]: section required by the particles command")
    sys.stdout.write(cfg.echo())
    outdir = _prepare_outdir(cfg)
    seed = cfg.sections["noise"]["seed"]
    dt, t_end = plan.grid
    nsteps = int(round(t_end / dt))
    system = sample_gaussian_species(plan.particle_counts,
                                     plan.particle_means,
                                     plan.particle_spreads,
                                     CounterStream(seed, tag=2),
                                     dim=plan.dimension)
    # stream tags match the field/particle split used by the comparison
    # report, so this command reproduces its particle side exactly
    move = CounterStream(seed, tag=3)
    flip = CounterStream(seed, tag=4)
    rparams = ReactionParams(plan.coupling.kappa, plan.coupling.radius)
    n = system.n
    rows = ["t,n_a,n_b,b_mass"]
    rows.append("%.17g,%d,%d,%.17g" % (0.0, system.n_a, system.n_b,
                                       system.n_b / n))
    for k in range(nsteps):
        system = langevin_step(system, plan.params.gamma, plan.params.sigma,
                               plan.params.potential, dt, move)
        system = react(system, rparams, dt, flip)
        rows.append("%.17g,%d,%d,%.17g" % ((k + 1) * dt, system.n_a,
                                           system.n_b, system.n_b / n))
    (outdir / "particles.csv").write_text("\n".join(rows) + "\n")
    (outdir / "meta").write_text(render_meta(cfg, (seed,)))
    print(f"final counts: A {system.n_a}, B {system.n_b} of {n}")
    print(f"outputs written to {outdir}")
    return 0


def _cmd_compare(cfg, args):
    plan = build_run_plan(cfg)
    if not plan.two_species:
        raise ConfigError("[reaction]: section required by the compare command")
    sys.stdout.write(cfg.echo())
    outdir = _prepare_outdir(cfg)
    seed = cfg.sections["noise"]["seed"]
    report = compare_particle_vs_ridk(plan, seed=seed)
    rows = ["t,particle_b_mass,ridk_b_mass"]
    for k in range(len(report.times)):
        rows.append("%.17g,%.17g,%.17g" % (report.times[k],
                                           report.particle_b_mass[k],
                                           report.ridk_b_mass[k]))
    (outdir / "compare.csv").write_text("\n".join(rows) + "\n")
    (outdir / "meta").write_text(render_meta(cfg, (seed,)))
    print(f"sup distance between B-mass profiles: {report.sup_distance:.6g}")
    print("particle B-mass non-decreasing: "
          + ("yes" if report.particle_monotone else "no"))
    print(f"outputs written to {outdir}")
    return 0


def _cmd_invariants(cfg, args):
    seed = cfg.sections["noise"]["seed"]
    rows = invariant_suite(seed=seed)
    outdir = _prepare_outdir(cfg)
    lines = [("PASS" if row["passed"] else "FAIL")
             + f"  {row['name']}: {row['detail']}" for row in rows]
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    (outdir / "invariants.txt").write_text(text)
    (outdir / "meta").write_text(render_meta(cfg, (seed,)))
    return 0 if all(row["passed"] for row in rows) else 2


_COMMANDS = {
    "run": _cmd_run,
    "convergence": _cmd_convergence,
    "noise-check": _cmd_noise_check,
    "particles": _cmd_particles,
    "compare": _cmd_compare,
    "invariants": _cmd_invariants,
}


# -- entry point ---------------------------------------------------------------

def _build_parser():
    parser = argparse.ArgumentParser(
        prog="ridk",
        description="Regularised inertial Dean-Kawasaki laboratory")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("config", nargs="?", default=None,
                       help="INI config file (optional; defaults apply)")
        p.add_argument("--preset", default=None,
                       help="named experiment preset to expand")
        p.add_argument("--seed", type=int, default=None,
                       help="override [noise] seed")
        p.add_argument("--out", default=None,
                       help="override [output] directory")
        p.add_argument("--override", action="append", default=[],
                       metavar="SECTION.KEY=VALUE",
                       help="set a single config value (repeatable)")

    common(sub.add_parser("run", help="integrate one experiment"))
    conv = sub.add_parser("convergence", help="mesh refinement study")
    common(conv)
    conv.add_argument("--kind", choices=("ritz", "deterministic-solution"),
                      default="ritz")
    conv.add_argument("--levels", default="16,32,64,128",
                      help="comma-separated nested resolutions")
    nc = sub.add_parser("noise-check",
                        help="spectrum and covariance diagnostics")
    common(nc)
    nc.add_argument("--epsilon", type=float, default=None,
                    help="override [model] epsilon")
    nc.add_argument("--samples", type=int, default=4000,
                    help="Monte Carlo sample count")
    common(sub.add_parser("particles", help="Langevin particle reference run"))
    common(sub.add_parser("compare",
                          help="particle vs field B-mass comparison"))
    common(sub.add_parser("invariants", help="run the property suite"))
    return parser


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        if args.config is not None:
            try:
                text = Path(args.config).read_text(encoding="utf-8")
            except OSError as exc:
                raise ConfigError(f"cannot read config {args.config}: "
                                  f"{exc.strerror or exc}")
        else:
            text = ""
        overrides = list(args.override)
        if args.seed is not None:
            overrides.append(f"noise.seed={args.seed}")
        if args.out is not None:
            overrides.append(f"output.directory={args.out}")
        if getattr(args, "epsilon", None) is not None:
            overrides.append(f"model.epsilon={args.epsilon!r}")
        cfg = parse_config(text, overrides=overrides, preset=args.preset)
        return _COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (RuntimeError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
