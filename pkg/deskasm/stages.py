"""
Registry of named pipeline stages.  A stage is a callable
``fn(state, **params) -> dict`` whose result is merged into the shared state.
"""
import fnmatch
import logging
from dataclasses import dataclass, field
from typing import Callable

logger = logging.getLogger(__name__)


@dataclass
class Stage:
    name:    str
    fn:      Callable[..., dict]
    inputs:  list[str] = field(default_factory=list)
    outputs: list[str] = field(default_factory=list)
    desc:    str = ""

    def run(self, state: dict, **kw) -> dict:
        missing = [k for k in self.inputs if k not in state]
        if missing:
            raise KeyError(f"stage {self.name} is missing input(s): {', '.join(missing)}")
        out = self.fn(state, **kw)
        return out if isinstance(out, dict) else {}


class StageFactory:
    """
    * holds every registered stage by name
    * ``register`` doubles as a decorator
    """
    def __init__(self):
        self.reg: dict[str, Stage] = {}

    # ---------- registration -----------------------------------------------
    def register(self, name: str, inputs=(), outputs=(), desc: str = ""):
        def wrap(fn):
            self.reg[name] = Stage(name, fn, list(inputs), list(outputs), desc or (fn.__doc__ or "").strip())
            logger.debug("[factory] registered stage %s", name)
            return fn
        return wrap

    # ---------- public helpers ---------------------------------------------
    def run(self, name: str, state: dict, **kw) -> dict:
        if name not in self.reg:
            raise KeyError(f"unknown stage {name!r}")
        return self.reg[name].run(state, **kw)

    def catalogue(self, pattern: str | None = None) -> list[str]:
        names = list(self.reg)
        if pattern:
            names = [n for n in names if fnmatch.fnmatch(n, pattern)]
        return names

    def describe(self, pattern: str | None = None) -> list[dict]:
        return [{"name": n, "desc": self.reg[n].desc, "inputs": self.reg[n].inputs,
                 "outputs": self.reg[n].outputs} for n in self.catalogue(pattern)]
