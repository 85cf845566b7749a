"""Small optimization benchmarks: Himmelblau descents and a toy tanh MLP."""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Optional, Sequence

import numpy as np

from pi_quant.errors import ConfigurationError, InputError
from pi_quant.models import DescentRun, ToyModel, TrainingRun
from pi_quant.optimizers import Optimizer
from pi_quant.settings import settings

logger = logging.getLogger(__name__)

DEFAULT_STARTS = ((0.0, 0.0), (0.0, -5.0), (-4.0, 4.0), (4.0, -1.0))
DIVERGENCE_LIMIT = 1e6
DIVERGENCE_GROWTH = 100.0
TASKS = ("regression", "moons")


def himmelblau(x, y):
    return (x * x + y - 11.0) ** 2 + (x + y * y - 7.0) ** 2


def himmelblau_grad(x, y):
    first = x * x + y - 11.0
    second = x + y * y - 7.0
    return 4.0 * x * first + 2.0 * second, 2.0 * first + 4.0 * y * second


def run_descent(optimizer: str, start: Sequence[float], steps: int, lr: Optional[float] = None,
                lam: int = 2, bits: int = 8, start_id: int = 0) -> DescentRun:
    """Follow the Himmelblau gradient from ``start``; stops early once |x| or |y| exceeds 1e6."""
    if steps < 0:
        raise ConfigurationError(f"steps must be >= 0, got {steps}")
    opt = Optimizer.create(optimizer, settings.himmelblau_lr if lr is None else lr, lam=lam, bits=bits)
    point = np.array(start, dtype=np.float64)
    trajectory = [(float(point[0]), float(point[1]), float(himmelblau(*point)))]
    diverged = False

    for _ in range(steps):
        grad = np.array(himmelblau_grad(*point))
        (point,) = opt.step([point], [grad])
        f = himmelblau(*point)
        if not np.all(np.isfinite(point)) or np.max(np.abs(point)) > DIVERGENCE_LIMIT or not np.isfinite(f):
            diverged = True
            logger.warning("%s diverged from start %s after %d steps", optimizer, tuple(start), opt.step_count)
            break
        trajectory.append((float(point[0]), float(point[1]), float(f)))

    return DescentRun(
        optimizer=optimizer,
        start=(float(start[0]), float(start[1])),
        start_id=start_id,
        steps=steps,
        trajectory=trajectory,
        final_f=trajectory[-1][2],
        diverged=diverged,
    )


def run_descents(optimizer: str, steps: int, starts: Sequence[Sequence[float]] = DEFAULT_STARTS,
                 lr: Optional[float] = None, lam: int = 2, bits: int = 8, workers: int = 1) -> list[DescentRun]:
    def one(indexed):
        start_id, start = indexed
        return run_descent(optimizer, start, steps, lr=lr, lam=lam, bits=bits, start_id=start_id)

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        return list(pool.map(one, enumerate(starts)))


def loss_diverged(value: float, initial: float) -> bool:
    """Non-finite, above DIVERGENCE_LIMIT, or DIVERGENCE_GROWTH times the loss before training."""
    if not np.isfinite(value) or value > DIVERGENCE_LIMIT:
        return True
    return initial > 0.0 and value > DIVERGENCE_GROWTH * initial


def init_model(layer_sizes: Sequence[int], seed: int) -> ToyModel:
    if len(layer_sizes) < 2 or any(size < 1 for size in layer_sizes):
        raise ConfigurationError(f"invalid layer sizes {list(layer_sizes)}")
    rng = np.random.default_rng(seed)
    weights = [rng.standard_normal((fan_in, fan_out)) / np.sqrt(fan_in)
               for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:])]
    biases = [np.zeros(fan_out) for fan_out in layer_sizes[1:]]
    return ToyModel(layer_sizes=list(layer_sizes), weights=weights, biases=biases)


def _forward(model: ToyModel, batch: np.ndarray) -> list[np.ndarray]:
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim != 2 or batch.shape[1] != model.layer_sizes[0]:
        raise InputError(f"batch shape {batch.shape} does not match input width {model.layer_sizes[0]}")
    activations = [batch]
    last = len(model.weights) - 1
    for index, (weight, bias) in enumerate(zip(model.weights, model.biases)):
        z = activations[-1] @ weight + bias
        activations.append(z if index == last else np.tanh(z))
    return activations


def mlp_forward(model: ToyModel, batch) -> np.ndarray:
    return _forward(model, batch)[-1]


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = np.exp(logits - logits.max(axis=1, keepdims=True))
    return shifted / shifted.sum(axis=1, keepdims=True)


def loss_and_output_grad(outputs: np.ndarray, targets, loss: str) -> tuple[float, np.ndarray]:
    if loss == "mse":
        targets = np.asarray(targets, dtype=np.float64)
        if targets.shape != outputs.shape:
            raise InputError(f"target shape {targets.shape} does not match output shape {outputs.shape}")
        residual = outputs - targets
        return float(np.mean(residual ** 2)), 2.0 * residual / residual.size
    if loss == "cross_entropy":
        labels = np.asarray(targets)
        if labels.shape != (outputs.shape[0],) or labels.min(initial=0) < 0 or labels.max(initial=0) >= outputs.shape[1]:
            raise InputError("cross-entropy targets must be one class index per row")
        probs = _softmax(outputs)
        rows = np.arange(outputs.shape[0])
        value = float(-np.mean(np.log(probs[rows, labels] + 1e-300)))
        grad = probs.copy()
        grad[rows, labels] -= 1.0
        return value, grad / outputs.shape[0]
    raise ConfigurationError(f"unknown loss {loss!r}")


def mlp_backward(model: ToyModel, batch, targets, loss: str = "mse") -> tuple[float, list[np.ndarray]]:
    """Mean loss and its gradients in ``model.parameters()`` order."""
    activations = _forward(model, batch)
    value, delta = loss_and_output_grad(activations[-1], targets, loss)
    grads = []
    for index in range(len(model.weights) - 1, -1, -1):
        grads.append(delta.sum(axis=0))
        grads.append(activations[index].T @ delta)
        if index:
            delta = (delta @ model.weights[index].T) * (1.0 - activations[index] ** 2)
    grads.reverse()
    return value, grads


def make_task(task: str, n: int, seed: int) -> tuple[np.ndarray, np.ndarray, str, list[int]]:
    """Inputs, targets, loss name and default layer sizes for a synthetic task."""
    rng = np.random.default_rng(seed)
    if task == "regression":
        inputs = rng.uniform(-1.0, 1.0, size=(n, 1))
        targets = np.sin(3.0 * inputs) + 0.05 * rng.standard_normal((n, 1))
        return inputs, targets, "mse", [1, 16, 1]
    if task == "moons":
        labels = np.arange(n) % 2
        angle = rng.uniform(0.0, np.pi, size=n)
        upper = np.column_stack([np.cos(angle), np.sin(angle)])
        lower = np.column_stack([1.0 - np.cos(angle), 0.5 - np.sin(angle)])
        inputs = np.where(labels[:, None] == 0, upper, lower) + 0.1 * rng.standard_normal((n, 2))
        return inputs, labels, "cross_entropy", [2, 16, 2]
    raise ConfigurationError(f"unknown task {task!r}, expected one of {TASKS}")


def train_toy(task: str, optimizer: str, epochs: int, seed: int, lr: Optional[float] = None,
              lam: int = 2, bits: int = 8, samples: int = 256, batch_size: int = 32) -> TrainingRun:
    """Minibatch training; ``losses[0]`` is the loss before the first update, then one per epoch."""
    if epochs < 0 or batch_size < 1 or samples < 1:
        raise ConfigurationError("epochs must be >= 0, batch size and samples >= 1")
    inputs, targets, loss, layer_sizes = make_task(task, samples, seed)
    model = init_model(layer_sizes, seed)
    opt = Optimizer.create(optimizer, settings.mlp_lr if lr is None else lr, lam=lam, bits=bits)
    rng = np.random.default_rng(seed + 1)

    losses = [mlp_backward(model, inputs, targets, loss)[0]]
    diverged = False
    for epoch in range(epochs):
        order = rng.permutation(samples)
        for start in range(0, samples, batch_size):
            chosen = order[start:start + batch_size]
            value, grads = mlp_backward(model, inputs[chosen], targets[chosen], loss)
            if loss_diverged(value, losses[0]) or not all(np.all(np.isfinite(g)) for g in grads):
                diverged = True
                break
            model = model.with_parameters(opt.step(model.parameters(), grads))
        if diverged:
            break
        epoch_loss = mlp_backward(model, inputs, targets, loss)[0]
        if loss_diverged(epoch_loss, losses[0]):
            diverged = True
            break
        losses.append(epoch_loss)

    if diverged:
        logger.warning("%s on %s diverged in epoch %d (seed %d)", optimizer, task, epoch, seed)
    return TrainingRun(
        task=task,
        optimizer=optimizer,
        lambda_=lam if optimizer == "pi_adam" else None,
        seed=seed,
        losses=losses,
        diverged=diverged,
    )


def train_toy_seeds(task: str, optimizer: str, epochs: int, seeds: Sequence[int], workers: int = 1,
                    **kwargs) -> list[TrainingRun]:
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        return list(pool.map(lambda seed: train_toy(task, optimizer, epochs, seed, **kwargs), seeds))
