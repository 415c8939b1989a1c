"""Problem-config handling shared by the service and the command line.

A problem config is a JSON object with

* the domain: ``"graph"`` (inline graph object), ``"graph_file"`` (path,
  resolved client-side), or ``"generate"`` (``{"family": "dgm"|"ba", ...}``);
* the mesh: ``"target_h"`` (spacing) or ``"log2_inv_h"`` (so the spacing is
  ``2**-k``);
* coefficients ``"c"``, ``"p"``, ``"f"`` as expression strings, each either
  global or ``{"default": ..., "<edge id>": ...}``; all default to ``"1"``;
* optionally ``"exact"`` (same convention) for error reporting.
"""

from __future__ import annotations

import json
from pathlib import Path

from .fem import ConfigError, Problem, build_mesh, make_problem
from .graphs import MetricGraph, barabasi_albert, dgm, graph_from_dict


def generate_graph(family: str, *, level: int | None = None, n: int | None = None,
                   m_attach: int = 2, seed: int = 0) -> MetricGraph:
    if family == "dgm":
        if level is None:
            raise ConfigError("dgm generator needs 'level'")
        return dgm(level)
    if family == "ba":
        if n is None:
            raise ConfigError("ba generator needs 'n'")
        return barabasi_albert(n, m_attach, seed)
    raise ConfigError(f"unknown graph family {family!r}")


def graph_from_config(cfg: dict, base_dir: Path | None = None) -> MetricGraph:
    sources = [k for k in ("graph", "graph_file", "generate") if cfg.get(k) is not None]
    if len(sources) != 1:
        raise ConfigError(
            f"config needs exactly one of 'graph', 'graph_file', 'generate'; got {sources}"
        )
    if "graph" in sources:
        return graph_from_dict(cfg["graph"])
    if "graph_file" in sources:
        path = Path(cfg["graph_file"])
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        return graph_from_dict(json.loads(path.read_text()))
    gen = dict(cfg["generate"])
    family = gen.pop("family", None)
    if family is None:
        raise ConfigError("'generate' needs a 'family'")
    return generate_graph(family, **gen)


def target_h_from_config(cfg: dict) -> float:
    if cfg.get("target_h") is not None and cfg.get("log2_inv_h") is not None:
        raise ConfigError("give either 'target_h' or 'log2_inv_h', not both")
    if cfg.get("target_h") is not None:
        return float(cfg["target_h"])
    if cfg.get("log2_inv_h") is not None:
        return 2.0 ** (-int(cfg["log2_inv_h"]))
    raise ConfigError("config needs 'target_h' or 'log2_inv_h'")


def problem_from_config(cfg: dict, base_dir: Path | None = None,
                        target_h: float | None = None) -> Problem:
    """Build a :class:`Problem`; ``target_h`` overrides the config's mesh."""
    g = graph_from_config(cfg, base_dir=base_dir)
    h = target_h if target_h is not None else target_h_from_config(cfg)
    return make_problem(
        g,
        build_mesh(g, h),
        c=cfg.get("c", "1"),
        p=cfg.get("p", "1"),
        f=cfg.get("f", "1"),
    )


def inline_graph_file(cfg: dict, base_dir: Path | None = None) -> dict:
    """Replace a ``graph_file`` reference by the inline graph object."""
    if cfg.get("graph_file") is None:
        return cfg
    out = dict(cfg)
    path = Path(out.pop("graph_file"))
    if base_dir is not None and not path.is_absolute():
        path = base_dir / path
    out["graph"] = json.loads(path.read_text())
    return out
