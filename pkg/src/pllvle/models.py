"""Predictive classifier, GCN inference model and MLP observation model."""
import json
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from .dirichlet import ALPHA_FLOOR, DirichletParams
from .numeric import autograd as ag
from .numeric.optim import ParamStore


def kaiming_uniform(rng, fan_in, fan_out):
    bound = np.sqrt(6.0 / fan_in)
    return rng.gen.uniform(-bound, bound, size=(fan_in, fan_out))


def xavier_uniform(rng, fan_in, fan_out):
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.gen.uniform(-bound, bound, size=(fan_in, fan_out))


@dataclass
class ModelSpec:
    """Predictive-model configuration shared by the learner and the clean model."""

    arch: str = "linear"
    hidden: tuple = ()
    epochs: int = 50
    lr: float = 1e-2
    weight_decay: float = 1e-4
    batch_size: int = 100

    def __post_init__(self):
        if self.arch not in ("linear", "mlp"):
            raise ValueError(f"unknown architecture {self.arch!r}")
        self.hidden = tuple(int(h) for h in self.hidden)
        if self.arch == "mlp" and not self.hidden:
            raise ValueError("mlp needs at least one hidden layer")


class PredictiveModel:
    """Linear or ReLU-MLP classifier producing softmax probabilities.

    Features for the affinity graph are the last hidden activations (MLP) or
    the raw inputs (linear).
    """

    def __init__(self, arch, in_dim, n_classes, hidden=(), rng=None, zero_init=False):
        self.arch = arch
        self.in_dim = in_dim
        self.n_classes = n_classes
        self.hidden = tuple(hidden) if arch == "mlp" else ()
        self.store = ParamStore()
        sizes = [in_dim, *self.hidden, n_classes]
        for i, (a, b) in enumerate(zip(sizes[:-1], sizes[1:])):
            last = i == len(sizes) - 2
            if zero_init or rng is None:
                w = np.zeros((a, b))
            elif last:
                w = xavier_uniform(rng, a, b)
            else:
                w = kaiming_uniform(rng, a, b)
            self.store.add(f"W{i}", w)
            self.store.add(f"b{i}", np.zeros(b))
        self.n_layers = len(sizes) - 1

    @classmethod
    def from_spec(cls, spec, in_dim, n_classes, rng):
        return cls(spec.arch, in_dim, n_classes, spec.hidden, rng)

    @property
    def feature_dim(self):
        return self.hidden[-1] if self.hidden else self.in_dim

    def forward(self, x):
        """Return (logits, features) as tensors."""
        h = ag.as_tensor(np.asarray(x, dtype=np.float64))
        feats = h
        for i in range(self.n_layers):
            h = ag.matmul(h, self.store.tensor(f"W{i}")) + self.store.tensor(f"b{i}")
            if i < self.n_layers - 1:
                h = ag.relu(h)
                feats = h
        return h, feats

    def config(self):
        return {"arch": self.arch, "in_dim": self.in_dim, "n_classes": self.n_classes, "hidden": list(self.hidden)}


def _check_cols(model, x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.in_dim:
        raise ValueError(f"expected inputs with {model.in_dim} columns, got shape {x.shape}")
    return x


def predict(model, features_in):
    x = _check_cols(model, features_in)
    logits, _ = model.forward(x)
    return ag.softmax(logits).value


def extract_features(model, features_in):
    x = _check_cols(model, features_in)
    return model.forward(x)[1].value.copy()


class InferenceModel:
    """Two-layer GCN: alpha = softplus(A~ relu(A~ [phi | l] W0) W1) + floor."""

    def __init__(self, feature_dim, n_classes, hidden=64, rng=None):
        self.feature_dim = feature_dim
        self.n_classes = n_classes
        self.hidden = hidden
        self.store = ParamStore()
        in_dim = feature_dim + n_classes
        if rng is None:
            self.store.add("W0", np.zeros((in_dim, hidden)))
            self.store.add("W1", np.zeros((hidden, n_classes)))
        else:
            self.store.add("W0", kaiming_uniform(rng, in_dim, hidden))
            self.store.add("W1", xavier_uniform(rng, hidden, n_classes))

    def forward(self, normalized, phi, logical):
        z = np.concatenate([np.asarray(phi, dtype=np.float64), np.asarray(logical, dtype=np.float64)], axis=1)
        h = ag.relu(ag.matmul(normalized, ag.matmul(z, self.store.tensor("W0"))))
        out = ag.matmul(normalized, ag.matmul(h, self.store.tensor("W1")))
        return ag.softplus(out) + ALPHA_FLOOR

    def config(self):
        return {"feature_dim": self.feature_dim, "n_classes": self.n_classes, "hidden": self.hidden}


def infer_alphas(inf, logical, phi, graph):
    logical = np.asarray(logical, dtype=np.float64)
    phi = np.asarray(phi, dtype=np.float64)
    n = logical.shape[0]
    if phi.shape[0] != n or graph.n != n:
        raise ValueError("logical labels, features and graph must cover the same examples")
    if phi.shape[1] != inf.feature_dim or logical.shape[1] != inf.n_classes:
        raise ValueError("feature or label dimension does not match the inference model")
    return DirichletParams(inf.forward(graph.normalized, phi, logical).value)


class ObservationModel:
    """Three affine layers with ReLU between and a sigmoid output."""

    def __init__(self, n_classes, hidden=(64, 64), rng=None):
        self.n_classes = n_classes
        self.hidden = tuple(hidden)
        if len(self.hidden) != 2:
            raise ValueError("observation model has exactly two hidden layers")
        self.store = ParamStore()
        sizes = [n_classes, *self.hidden, n_classes]
        for i, (a, b) in enumerate(zip(sizes[:-1], sizes[1:])):
            if rng is None:
                w = np.zeros((a, b))
            elif i == 2:
                w = xavier_uniform(rng, a, b)
            else:
                w = kaiming_uniform(rng, a, b)
            self.store.add(f"W{i}", w)
            self.store.add(f"b{i}", np.zeros(b))

    def forward(self, d):
        h = ag.as_tensor(d)
        for i in range(3):
            h = ag.matmul(h, self.store.tensor(f"W{i}")) + self.store.tensor(f"b{i}")
            if i < 2:
                h = ag.relu(h)
        return ag.sigmoid(h)

    def config(self):
        return {"n_classes": self.n_classes, "hidden": list(self.hidden)}


def observe_tau(obs, d_sample):
    d = getattr(d_sample, "dist", d_sample)
    return obs.forward(np.asarray(d, dtype=np.float64)).value


@dataclass
class ModelBundle:
    predictive: PredictiveModel
    inference: InferenceModel = None
    observation: ObservationModel = None
    extra: dict = field(default_factory=dict)

    def items(self):
        out = [("predictive", self.predictive)]
        if self.inference is not None:
            out.append(("inference", self.inference))
        if self.observation is not None:
            out.append(("observation", self.observation))
        return out


FORMAT = "pllvle-tensors/1"


def save_models(bundle, directory, seed=None):
    """Write ``models.bin`` (raw little-endian float64) and ``models.json``."""
    os.makedirs(directory, exist_ok=True)
    tensors, blobs, offset = [], [], 0
    for model_name, model in bundle.items():
        for name, arr in model.store:
            data = np.ascontiguousarray(arr, dtype="<f8").tobytes()
            tensors.append({"name": f"{model_name}/{name}", "shape": list(arr.shape), "offset": offset, "dtype": "<f8"})
            blobs.append(data)
            offset += len(data)
    manifest = {
        "format": FORMAT,
        "seed": seed,
        "architecture": {name: m.config() for name, m in bundle.items()},
        "tensors": tensors,
        **bundle.extra,
    }
    _atomic_write(os.path.join(directory, "models.bin"), b"".join(blobs))
    _atomic_write(os.path.join(directory, "models.json"), json.dumps(manifest, indent=2).encode())


def load_models(directory):
    with open(os.path.join(directory, "models.json")) as fh:
        manifest = json.load(fh)
    if manifest.get("format") != FORMAT:
        raise ValueError(f"unsupported checkpoint format {manifest.get('format')!r}")
    with open(os.path.join(directory, "models.bin"), "rb") as fh:
        raw = fh.read()
    arch = manifest["architecture"]
    p = arch["predictive"]
    models = {"predictive": PredictiveModel(p["arch"], p["in_dim"], p["n_classes"], tuple(p["hidden"]))}
    if "inference" in arch:
        a = arch["inference"]
        models["inference"] = InferenceModel(a["feature_dim"], a["n_classes"], a["hidden"])
    if "observation" in arch:
        a = arch["observation"]
        models["observation"] = ObservationModel(a["n_classes"], tuple(a["hidden"]))
    for t in manifest["tensors"]:
        model_name, name = t["name"].split("/", 1)
        count = int(np.prod(t["shape"])) if t["shape"] else 1
        arr = np.frombuffer(raw, dtype=t["dtype"], count=count, offset=t["offset"]).reshape(t["shape"])
        models[model_name].store.params[name][...] = arr
    bundle = ModelBundle(models["predictive"], models.get("inference"), models.get("observation"))
    return bundle, manifest


def _atomic_write(path, data):
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


def spec_dict(spec):
    d = asdict(spec)
    d["hidden"] = list(d["hidden"])
    return d
