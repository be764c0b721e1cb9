"""Desk-scale Community Safety Watch: federated averaging over simnet.

Topology: one parent fedlet hosts the watch community and holds the global
model, the masked-gradient accumulator, and the decoded aggregate; each child
fedlet replicates the model, trains on its local synthetic frames, and pushes
its gradient through the declared toolkit transforms (top-K, mask) into the
parent's aggregation round. The parent app only ever touches the global model
and the decoded aggregate.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path

import click
import numpy as np

from comverse.appspec import AppSpec, Registration, instantiate, load_spec
from comverse.csw.data import SampleBatch, make_batch, make_ground_truth
from comverse.csw.training import Model, local_train, loss, pooled
from comverse.fedlet import Fedlet
from comverse.identity import FedId, member_fed_id
from comverse.transport.simnet import SimNet

SPEC_PATH = Path(__file__).parent / "csw.spec"

MODEL_OBJECT = "global_model"
ACCUMULATOR_OBJECT = "gradient_accumulator"
AGGREGATE_OBJECT = "gradient_aggregate"
REPLICA_OBJECT = "model_replica"
GRADIENT_OBJECT = "local_gradient"
FRAMES_OBJECT = "sensor_frames"


def load_csw_spec(topk: int | None = None) -> AppSpec:
    """The packaged spec, with the gradient transform chain adjusted to the
    requested compression (topk=None keeps the file's default, 0 disables)."""
    spec = load_spec(SPEC_PATH.read_text())
    if topk is not None:
        if topk > 0:
            spec.transforms[GRADIENT_OBJECT] = [{"name": "topk", "k": topk}, {"name": "mask"}]
        else:
            spec.transforms[GRADIENT_OBJECT] = [{"name": "mask"}]
    return spec


@dataclass
class CswDeployment:
    net: SimNet
    parent: Fedlet
    children: list[Fedlet]
    batches: list[SampleBatch]
    ground_truth: np.ndarray
    eta: float
    dim: int
    parent_reg: Registration
    child_regs: list[Registration]
    loss_history: list[float] = field(default_factory=list)

    @property
    def community_id(self) -> FedId:
        return self.parent.fed_id

    def model(self) -> Model:
        _, entries = self.parent.fedcore.get_object(MODEL_OBJECT)
        return Model(weights=np.array(entries["weights"], dtype=float), round=entries["round"])

    def pooled_loss(self) -> float:
        return loss(self.model().weights, pooled(self.batches))


def build_deployment(
    children: int = 3,
    dim: int = 8,
    samples: int = 50,
    seed: int = 0,
    topk: int | None = 0,
    eta: float = 0.1,
    noise: float = 0.0,
) -> CswDeployment:
    net = SimNet(seed=seed)
    parent = Fedlet.sim(net, "watch-hq", name="Safety Watch HQ", hosts_community=True)
    kids = [Fedlet.sim(net, f"cam-{i:02d}") for i in range(children)]
    parent.fedctl.join_policy.allowlist = {
        member_fed_id(kid.fed_id, parent.fed_id).value for kid in kids
    }
    for kid in kids:
        kid.join_community(parent.fed_id)
    net.settle()

    spec = load_csw_spec(topk=topk)
    parent_reg = instantiate(spec, parent.fedcore, node="parent")
    child_regs = [
        instantiate(spec, kid.fedcore, node="child", community=parent.fed_id) for kid in kids
    ]

    truth = make_ground_truth(dim, seed)
    batches = [make_batch(truth, samples, seed=seed * 1000 + i + 1, noise=noise) for i in range(children)]
    for kid, batch in zip(kids, batches):
        kid.fedcore.put_object(
            FRAMES_OBJECT,
            {"features": batch.features.tolist(), "labels": batch.labels.tolist()},
            kind="raw",
        )
    parent.fedcore.put_object(
        MODEL_OBJECT, {"weights": [0.0] * dim, "round": 0}, kind="state"
    )
    return CswDeployment(
        net=net,
        parent=parent,
        children=kids,
        batches=batches,
        ground_truth=truth,
        eta=eta,
        dim=dim,
        parent_reg=parent_reg,
        child_regs=child_regs,
    )


# -- the two app roles --------------------------------------------------------


def distribute_model(dep: CswDeployment) -> None:
    """Drive every child's pull binding once so replicas match the parent."""
    now = dep.net.clock.now()
    for kid in dep.children:
        for state in kid.fedcore.bindings:
            if state.binding.direction == "pull":
                kid.fedcore.sync_tick(state, now)


def child_train_step(dep: CswDeployment, kid: Fedlet) -> None:
    """The child app: read the replica and local frames, write the gradient."""
    _, replica = kid.fedcore.get_object(REPLICA_OBJECT)
    model = Model(weights=np.array(replica["weights"], dtype=float), round=replica["round"])
    _, frames = kid.fedcore.get_object(FRAMES_OBJECT)
    batch = SampleBatch(
        features=np.array(frames["features"], dtype=float),
        labels=np.array(frames["labels"], dtype=float),
    )
    grad = local_train(model, batch, contributor=kid.fed_id.value)
    kid.fedcore.put_object(
        GRADIENT_OBJECT, {"values": grad.values.tolist(), "round": grad.round}, kind="raw"
    )


def drive_contributions(dep: CswDeployment) -> None:
    now = dep.net.clock.now()
    for kid in dep.children:
        for state in kid.fedcore.bindings:
            if state.binding.direction == "push":
                kid.fedcore.sync_tick(state, now)
    dep.net.settle()


def parent_apply_update(dep: CswDeployment) -> Model:
    """The parent app: fold the decoded aggregate into the global model."""
    _, agg = dep.parent.fedcore.get_object(AGGREGATE_OBJECT)
    summed = np.array(agg["values"], dtype=float)
    model = dep.model()
    new_weights = model.weights - dep.eta * (summed / agg["contributors"])
    dep.parent.fedcore.put_object(
        MODEL_OBJECT,
        {"weights": new_weights.tolist(), "round": model.round + 1},
        kind="state",
    )
    return Model(weights=new_weights, round=model.round + 1)


def run_round(dep: CswDeployment, push_attempts: int = 4) -> bool:
    """One full round: distribute, train locally, aggregate, update.

    Returns False when the round could not complete (no eligible members or
    a dropout that left nothing to retry with)."""
    dep.net.settle()
    distribute_model(dep)
    dep.net.settle()
    for kid in dep.children:
        _, replica = kid.fedcore.get_object(REPLICA_OBJECT)
        if "weights" in replica:
            child_train_step(dep, kid)
    state = dep.parent.fedcore.open_round()
    if state is None:
        return False
    dep.net.settle()
    for _ in range(push_attempts):
        drive_contributions(dep)
        if dep.parent.fedcore.current_round is None:
            break
    if dep.parent.fedcore.current_round is not None:
        dep.parent.fedcore._abort_round("round did not complete")
        return False
    parent_apply_update(dep)
    dep.loss_history.append(dep.pooled_loss())
    return True


def run_training(dep: CswDeployment, rounds: int) -> list[float]:
    for _ in range(rounds):
        run_round(dep)
    return dep.loss_history


@click.command()
@click.option("--children", default=3, show_default=True, help="number of child fedlets")
@click.option("--rounds", default=50, show_default=True, help="training rounds")
@click.option("--dim", default=8, show_default=True, help="model dimension")
@click.option("--topk", default=0, show_default=True, help="top-K compression (0 = off)")
@click.option("--seed", default=0, show_default=True, help="scenario seed")
@click.option("--eta", default=0.1, show_default=True, help="learning rate")
@click.option("--samples", default=50, show_default=True, help="samples per child")
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="write loss CSV here")
def main(children, rounds, dim, topk, seed, eta, samples, out):
    """Run the federated safety-watch demo and emit per-round loss."""
    dep = build_deployment(
        children=children, dim=dim, samples=samples, seed=seed, topk=topk, eta=eta
    )
    run_training(dep, rounds)
    lines = ["round,loss"] + [f"{i + 1},{v:.12g}" for i, v in enumerate(dep.loss_history)]
    text = "\n".join(lines) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)
    final = dep.loss_history[-1] if dep.loss_history else float("nan")
    click.echo(f"final model round {dep.model().round}, pooled loss {final:.3e}", err=True)


if __name__ == "__main__":
    main()
