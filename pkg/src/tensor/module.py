"""
Base class for all parameterized components (layers, blocks, models).
Defines the parameter-walking interface shared by optimizer, checkpoint
and gradient audits.
"""
from abc import ABC, abstractmethod
from typing import Any, Dict, Iterator, List, Tuple

import numpy as np

from .tensor import Parameter


class Module(ABC):
    """Parameters and child modules are discovered from instance attributes in
    insertion order, which fixes the checkpoint manifest order."""

    @abstractmethod
    def forward(self, *args: Any, **kwargs: Any) -> Any:
        pass

    def __call__(self, *args: Any, **kwargs: Any) -> Any:
        return self.forward(*args, **kwargs)

    def _children(self) -> Iterator[Tuple[str, Any]]:
        for name, value in vars(self).items():
            if name.startswith("_"):
                continue
            if isinstance(value, (Parameter, Module)):
                yield name, value
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, (Parameter, Module)):
                        yield f"{name}.{i}", item

    def named_parameters(self, prefix: str = "") -> Iterator[Tuple[str, Parameter]]:
        for name, value in self._children():
            full = f"{prefix}{name}"
            if isinstance(value, Parameter):
                yield full, value
            else:
                yield from value.named_parameters(prefix=f"{full}.")

    def named_modules(self, prefix: str = "") -> Iterator[Tuple[str, "Module"]]:
        for name, value in self._children():
            if isinstance(value, Module):
                full = f"{prefix}{name}"
                yield full, value
                yield from value.named_modules(prefix=f"{full}.")

    def parameters(self) -> List[Parameter]:
        return [p for _, p in self.named_parameters()]

    def num_parameters(self) -> int:
        return int(sum(p.size for p in self.parameters()))

    def zero_(self) -> "Module":
        """Set every parameter to zero (used by identity and isolation checks)."""
        for p in self.parameters():
            p.assign(np.zeros_like(p.data))
        return self

    def state_dict(self) -> Dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state: Dict[str, np.ndarray]) -> None:
        own = dict(self.named_parameters())
        missing = set(own) - set(state)
        extra = set(state) - set(own)
        if missing or extra:
            raise KeyError(f"state mismatch: missing={sorted(missing)} unexpected={sorted(extra)}")
        for name, p in own.items():
            p.assign(np.asarray(state[name]))

    def astype(self, dtype) -> "Module":
        """Cast every parameter in place, e.g. to float64 for gradient checks."""
        for p in self.parameters():
            p.data = np.ascontiguousarray(p.data, dtype=np.dtype(dtype))
        return self
