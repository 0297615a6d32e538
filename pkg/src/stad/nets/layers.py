"""Layer descriptions shared by patch and dense networks."""

from dataclasses import dataclass, replace
from enum import Enum
from typing import Any, Dict


class LayerKind(Enum):
    """Layer kinds the patch networks are built from."""
    CONV = "conv"
    MAXPOOL = "maxpool"
    FC_DECODE = "fc-decode"


@dataclass(frozen=True)
class LayerSpec:
    """One layer of a patch network."""
    name: str
    kind: LayerKind
    kernel: int
    stride: int = 1
    out_channels: int = 0
    activation: bool = True
    dilation: int = 1

    def __post_init__(self):
        if self.kernel < 1 or self.stride < 1 or self.dilation < 1:
            raise ValueError(f"{self.name}: kernel, stride and dilation must be >= 1")

    @property
    def effective_kernel(self) -> int:
        return self.kernel + (self.kernel - 1) * (self.dilation - 1)

    def with_dense_stride(self, dilation: int) -> "LayerSpec":
        """Stride-1 copy evaluated at the given dilation."""
        return replace(self, stride=1, dilation=dilation)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "kind": self.kind.value,
            "kernel": self.kernel,
            "stride": self.stride,
            "out_channels": self.out_channels,
            "activation": self.activation,
            "dilation": self.dilation,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "LayerSpec":
        return cls(
            name=data["name"],
            kind=LayerKind(data["kind"]),
            kernel=int(data["kernel"]),
            stride=int(data.get("stride", 1)),
            out_channels=int(data.get("out_channels", 0)),
            activation=bool(data.get("activation", True)),
            dilation=int(data.get("dilation", 1)),
        )
