"""Multi-layered social network extraction from activity logs over
hierarchically organised objects (forums, topics, posts, ...).

Typical flow::

    from mlsn import ingest, flatten, layers
    loaded = ingest.load_dataset("data/")
    fpsn = flatten.flatten(loaded.network, "forum")
    sn = layers.build_sn(fpsn)
"""

from .core_model import (
    Activity,
    LevelSchema,
    MissingParent,
    ObjectNode,
    PreSocialNetwork,
    RolePath,
    User,
    Violation,
    ViolationKind,
    validate_hierarchy,
)
from .flatten import RoleNaming, flatten, render_role
from .layers import LayerKey, SocialNetwork, TimeWindowSpec, build_sn, enumerate_layers

__all__ = [
    "Activity",
    "LayerKey",
    "LevelSchema",
    "MissingParent",
    "ObjectNode",
    "PreSocialNetwork",
    "RoleNaming",
    "RolePath",
    "SocialNetwork",
    "TimeWindowSpec",
    "User",
    "Violation",
    "ViolationKind",
    "build_sn",
    "enumerate_layers",
    "flatten",
    "render_role",
    "validate_hierarchy",
]
