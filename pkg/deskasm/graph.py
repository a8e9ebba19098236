"""
Three-layer grasp graph and keyframe search.

Circles are object poses with the grasps usable there: the initial pose on
top, one circle per (stable placement, yaw) at the initial position in the
middle, the goal pose at the bottom.  Nodes are ``(circle id, grasp id)``.
Transfer edges join the same grasp across circles (the object moves in
hand), transit edges join grasps of one table-resting circle (the object
stays, the hand regrasps).
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import networkx as nx
import numpy as np

from deskasm.config import PlanningConfig
from deskasm.errors import NoPathError, PreconditionError
from deskasm.grasp import Grasp, GraspSet, IkSolver, collision_filter, ik_filter, ik_solver, transform_grasps
from deskasm.placement import StablePlacement, TableModel
from deskasm.robot import GripperModel, RobotModel
from deskasm.se3 import Pose

logger = logging.getLogger(__name__)

SOURCE, SINK = "source", "sink"
LAYERS = ("top", "middle", "bottom")

# (layer, object pose) -> predicate on (world grasp, joint solution)
Screen = Callable[[str, Pose], Callable[[Grasp, np.ndarray], bool]]


@dataclass(eq=False)
class Circle:
    id:        int
    layer:     str
    pose:      Pose                 # object pose in the world
    grasps:    GraspSet             # world frame, with joint solutions
    placement: int | None = None
    yaw:       float | None = None


@dataclass(eq=False)
class GraspGraph:
    circles: list[Circle]
    graph:   nx.Graph

    def layer(self, name: str) -> list[Circle]:
        return [c for c in self.circles if c.layer == name]

    def nodes_in(self, name: str) -> list[tuple[int, int]]:
        return [n for n, d in self.graph.nodes(data=True) if d["layer"] == name]

    def diagnostics(self) -> dict:
        """Node counts per layer and edge counts per kind / layer pair."""
        diag = {f"{name}_nodes": len(self.nodes_in(name)) for name in LAYERS}
        pairs: dict[str, int] = {}
        transit = 0
        for u, v, d in self.graph.edges(data=True):
            if d["kind"] == "transit":
                transit += 1
                continue
            a, b = sorted((self.graph.nodes[u]["layer"], self.graph.nodes[v]["layer"]), key=LAYERS.index)
            key = f"{a}-{b}"
            pairs[key] = pairs.get(key, 0) + 1
        diag["transfer_edges"] = dict(sorted(pairs.items()))
        diag["transit_edges"] = transit
        return diag

    def to_dict(self) -> dict:
        nodes = [{"circle": c, "grasp": g, "layer": d["layer"]} for (c, g), d in self.graph.nodes(data=True)]
        edges = [{"from": list(u), "to": list(v), "kind": d["kind"], "weight": d["weight"]}
                 for u, v, d in self.graph.edges(data=True)]
        circles = [{"id": c.id, "layer": c.layer, "pose": c.pose.to_dict(), "placement": c.placement,
                    "yaw": c.yaw, "grasps": c.grasps.ids} for c in self.circles]
        return {"circles": circles, "nodes": nodes, "edges": edges}


# ---------------------------------------------------------------- construction
def _screened(g: GraspSet, layer: str, pose: Pose, screen: Screen | None) -> GraspSet:
    if screen is None:
        return g
    ok = screen(layer, pose)
    return g.restrict([x.id for x in g.grasps if ok(x, g.configs[x.id])])


def _middle_chain(g_free: GraspSet, placement: StablePlacement, index: int, table: TableModel,
                  xy: tuple[float, float], yaw_samples: int, solve: IkSolver,
                  gripper: GripperModel, obstacles, screen: Screen | None) -> list[tuple[int, Pose, GraspSet, float]]:
    """All yaw circles of one placement; each circle seeds IK from the previous one."""
    out, warm = [], None
    for k in range(yaw_samples):
        yaw = 2.0 * math.pi * k / yaw_samples
        pose = placement.pose_on(table, xy[0], xy[1], yaw)
        g = transform_grasps(g_free, pose, "s'")
        g = collision_filter(g, gripper, obstacles, table)
        g = _screened(ik_filter(g, solve, seeds=warm), "middle", pose, screen)
        warm = g.configs or warm
        out.append((index, pose, g, yaw))
    return out


def build_grasp_graph(g_init: GraspSet, placements: list[StablePlacement], g_goal: GraspSet,
                      g_free: GraspSet, table: TableModel, robot: "RobotModel | IkSolver",
                      gripper: GripperModel, cfg: PlanningConfig | None = None,
                      init_pose: Pose | None = None, goal_pose: Pose | None = None,
                      obstacles=None, screen: Screen | None = None) -> GraspGraph:
    """
    *g_init* and *g_goal* are world-frame filtered sets at the initial and
    goal object poses; the middle layer is built here from *g_free*.
    *screen* may veto grasps per circle (for example on whole-arm collision).
    Disconnection is not an error at this point.
    """
    cfg = cfg or PlanningConfig()
    if not len(g_free):
        raise PreconditionError("free-space grasp set is empty")
    init_pose = init_pose or Pose.identity()
    goal_pose = goal_pose or Pose.identity()
    solve = ik_solver(robot)
    g_init = _screened(ik_filter(g_init, solve), "top", init_pose, screen)
    g_goal = _screened(ik_filter(g_goal, solve), "bottom", goal_pose, screen)

    xy = (float(init_pose.position[0]), float(init_pose.position[1]))
    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        chains = list(pool.map(
            lambda item: _middle_chain(g_free, item[1], item[0], table, xy, cfg.yaw_samples, solve,
                                       gripper, obstacles, screen),
            enumerate(placements)))

    circles = [Circle(0, "top", init_pose, g_init)]
    for chain in chains:
        for index, pose, g, yaw in chain:
            circles.append(Circle(len(circles), "middle", pose, g, index, yaw))
    circles.append(Circle(len(circles), "bottom", goal_pose, g_goal))

    G = nx.Graph()
    for c in circles:
        for gid in sorted(c.grasps.ids):
            G.add_node((c.id, gid), layer=c.layer, config=c.grasps.configs.get(gid))

    # transit: regrasp while the object rests on the table
    for c in circles:
        if c.layer == "bottom":
            continue
        ids = sorted(c.grasps.ids)
        for i, a in enumerate(ids):
            for b in ids[i + 1:]:
                G.add_edge((c.id, a), (c.id, b), kind="transit", weight=cfg.transit_cost)

    # transfer: same grasp id held across circles
    by_grasp: dict[int, list[int]] = {}
    for c in circles:
        for gid in c.grasps.ids:
            by_grasp.setdefault(gid, []).append(c.id)
    for gid in sorted(by_grasp):
        cids = sorted(by_grasp[gid])
        for i, a in enumerate(cids):
            for b in cids[i + 1:]:
                G.add_edge((a, gid), (b, gid), kind="transfer", weight=cfg.transfer_cost)

    graph = GraspGraph(circles, G)
    logger.debug("[graph] %d circle(s), %d node(s), %d edge(s)", len(circles), G.number_of_nodes(),
                 G.number_of_edges())
    return graph


# ---------------------------------------------------------------- search
@dataclass
class Keyframe:
    circle:   int
    layer:    str
    grasp_id: int
    pose:     Pose                  # object pose
    grasp:    Grasp                 # world frame
    config:   np.ndarray | None

    def to_dict(self) -> dict:
        return {"circle": self.circle, "layer": self.layer, "graspId": self.grasp_id,
                "objectPose": self.pose.to_dict(),
                "config": None if self.config is None else [float(x) for x in self.config]}


@dataclass
class KeyframePlan:
    keyframes: list[Keyframe] = field(default_factory=list)
    segments:  list[str] = field(default_factory=list)     # between consecutive keyframes
    cost:      float = 0.0

    @property
    def transfers(self) -> int:
        return self.segments.count("transfer")

    def to_dict(self) -> dict:
        return {"cost": self.cost, "keyframes": [k.to_dict() for k in self.keyframes],
                "segments": list(self.segments)}


def search_keyframes(graph: GraspGraph) -> KeyframePlan:
    """
    Cheapest path from any top node to any bottom node.  Ties fall to the
    first path found in insertion order, which is sorted by (circle id,
    grasp id).
    """
    top, bottom = graph.nodes_in("top"), graph.nodes_in("bottom")
    if not top or not bottom:
        empty = "top" if not top else "bottom"
        raise NoPathError(f"no path: the {empty} layer is empty", graph.diagnostics())

    G = graph.graph.copy()
    for n in top:
        G.add_edge(SOURCE, n, kind="source", weight=0.0)
    for n in bottom:
        G.add_edge(n, SINK, kind="sink", weight=0.0)
    try:
        cost, path = nx.single_source_dijkstra(G, SOURCE, SINK, weight="weight")
    except nx.NetworkXNoPath:
        raise NoPathError("no path from the initial pose to the goal through the grasp graph",
                          graph.diagnostics()) from None

    nodes = path[1:-1]
    keyframes = []
    for cid, gid in nodes:
        c = graph.circles[cid]
        keyframes.append(Keyframe(cid, c.layer, gid, c.pose, c.grasps.by_id()[gid], c.grasps.configs.get(gid)))
    segments = ["transfer" if a.grasp_id == b.grasp_id else "transit" for a, b in zip(keyframes, keyframes[1:])]
    logger.debug("[graph] keyframe path: %s", " -> ".join(f"{c}:{g}" for c, g in nodes))
    return KeyframePlan(keyframes, segments, float(cost))
