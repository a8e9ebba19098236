import logging
import time
from typing import Callable

from deskasm.errors import StageError
from deskasm.stages import StageFactory

logger = logging.getLogger(__name__)


def chain(*steps: tuple[str, str, dict] | tuple[str, str]) -> dict:
    """Build a linear flow from ``(node id, stage name[, params])`` tuples."""
    nodes = {}
    for i, step in enumerate(steps):
        node, stage = step[0], step[1]
        params = step[2] if len(step) > 2 else {}
        nxt = steps[i + 1][0] if i + 1 < len(steps) else None
        nodes[node] = {"stage": stage, "params": params, "next": nxt}
    return {"start": steps[0][0] if steps else None, "nodes": nodes}


class Executor:
    """Walk the flow and execute each node sequentially."""
    def __init__(self, flow: dict, factory: StageFactory, state: dict,
                 pub: Callable[[str, dict], None] | None = None):
        self.flow     = flow
        self.factory  = factory
        self.state    = state
        self.pub      = pub or (lambda event, payload: None)

    def run(self) -> dict:
        node  = self.flow["start"]
        nodes = self.flow["nodes"]

        while node:
            spec = nodes[node]                        # {stage, params, next}
            self.pub("node.start", {"id": node, "stage": spec["stage"]})
            logger.debug("[executor] running stage %s for node %s", spec["stage"], node)

            t0 = time.perf_counter()
            try:
                out = self.factory.run(spec["stage"], self.state, **spec.get("params", {}))
            except StageError:
                raise
            except Exception as exc:
                raise StageError(node, exc) from exc
            elapsed = time.perf_counter() - t0

            self.state.update(out)
            self.pub("node.done", {"id": node, "stage": spec["stage"], "elapsed": elapsed,
                                   "keys": sorted(out)})
            node = spec.get("next")

        self.pub("task.done", {"state": self.state})
        return self.state
