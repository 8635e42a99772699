"""Policy checkpoints (see :mod:`fast_transfer.binio` for the container)."""
from __future__ import annotations


from ..binio import read_container, write_container
from ..errors import ShapeMismatch
from .core import Policy
from .nets import MLP

POLICY_MAGIC = b"FASTPOL\x00"
POLICY_VERSION = 1


def save_policy(policy: Policy, path, hyperparams: dict | None = None) -> None:
    desc = {
        "kind": "policy",
        "id": policy.id,
        "sizes": list(policy.actor.sizes),
        "act_dim": policy.act_dim,
        "frozen": bool(policy.frozen),
        "hyperparams": hyperparams or policy.meta.get("hyperparams", {}),
        "meta": {k: v for k, v in policy.meta.items() if k != "hyperparams"},
    }
    write_container(path, POLICY_MAGIC, POLICY_VERSION, desc, [policy.actor.params])


def load_policy(path, expected_sizes=None) -> Policy:
    desc, (params,) = read_container(path, POLICY_MAGIC, POLICY_VERSION)
    sizes = tuple(desc["sizes"])
    if expected_sizes is not None and tuple(expected_sizes) != sizes:
        raise ShapeMismatch(f"checkpoint network {sizes} != expected {tuple(expected_sizes)}")
    actor = MLP(sizes, dtype=params.dtype, params=params)
    meta = dict(desc.get("meta", {}))
    meta["hyperparams"] = desc.get("hyperparams", {})
    policy = Policy(actor, desc["act_dim"], desc["id"], meta=meta)
    if desc["frozen"]:
        policy.freeze()
    return policy
