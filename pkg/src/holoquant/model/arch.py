"""Layer graph of the refined hologram CNN.

The network maps a 4-channel RGB-D image to 6 channels (RGB amplitude, then
RGB phase, each in [0, 1]):

    input -> stem conv+BN+ReLU6 -> N residual blocks -> concat(trunk, skip)
          -> depthwise 3x3 -> pointwise 1x1 -> Hardtanh[0, 1]

where ``skip`` is a depthwise 3x3 conv + BN on the raw input. Each residual
block is conv+BN+ReLU6, conv+BN, add, ReLU6.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..tensor import ConvDescriptor

ARCH_ID = "refined-cgh"
INPUT_SITE = "input"


@dataclass(frozen=True)
class Conv:
    name: str
    src: str
    desc: ConvDescriptor
    bn: bool
    activation: str | None = None

    @property
    def groups(self) -> int:
        return self.desc.groups


@dataclass(frozen=True)
class Add:
    name: str
    srcs: tuple[str, str]
    activation: str | None = None


@dataclass(frozen=True)
class Concat:
    name: str
    srcs: tuple[str, str]


@dataclass(frozen=True)
class ArchitectureSpec:
    layers: tuple
    num_blocks: int
    width: int
    in_channels: int
    out_channels: int
    arch_id: str = ARCH_ID

    @property
    def output(self) -> str:
        return self.layers[-1].name

    @property
    def convs(self) -> list[Conv]:
        return [layer for layer in self.layers if isinstance(layer, Conv)]

    @property
    def trunk_convs(self) -> list[Conv]:
        """Full (non-grouped) convolutions producing ``width`` feature maps."""
        return [c for c in self.convs if c.groups == 1 and c.desc.out_channels == self.width]

    @property
    def sites(self) -> list[str]:
        """Every tensor that gets its own activation quantization parameters."""
        return [INPUT_SITE] + [layer.name for layer in self.layers]

    def layer(self, name: str):
        for layer in self.layers:
            if layer.name == name:
                return layer
        raise KeyError(name)

    def channels(self, site: str) -> int:
        if site == INPUT_SITE:
            return self.in_channels
        layer = self.layer(site)
        if isinstance(layer, Conv):
            return layer.desc.out_channels
        if isinstance(layer, Add):
            return self.channels(layer.srcs[0])
        return sum(self.channels(s) for s in layer.srcs)

    def to_dict(self) -> dict:
        return {
            "id": self.arch_id,
            "num_blocks": self.num_blocks,
            "width": self.width,
            "in_channels": self.in_channels,
            "out_channels": self.out_channels,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ArchitectureSpec":
        if d.get("id") != ARCH_ID:
            raise ValueError(f"unknown architecture id {d.get('id')!r}")
        return build_reference_arch(
            num_blocks=d["num_blocks"],
            width=d["width"],
            in_channels=d["in_channels"],
            out_channels=d["out_channels"],
        )


def build_reference_arch(num_blocks: int = 14, width: int = 24, in_channels: int = 4, out_channels: int = 6) -> ArchitectureSpec:
    """The reference network: 1 + 2 * 14 = 29 trunk convolutions of 24 kernels."""
    if num_blocks < 0 or width < 1:
        raise ValueError("num_blocks must be >= 0 and width >= 1")
    layers: list = [
        Conv("stem", INPUT_SITE, ConvDescriptor(in_channels, width), bn=True, activation="relu6")
    ]
    prev = "stem"
    for k in range(num_blocks):
        p = f"block{k}"
        layers.append(Conv(f"{p}.conv1", prev, ConvDescriptor(width, width), bn=True, activation="relu6"))
        layers.append(Conv(f"{p}.conv2", f"{p}.conv1", ConvDescriptor(width, width), bn=True))
        layers.append(Add(f"{p}.add", (prev, f"{p}.conv2"), activation="relu6"))
        prev = f"{p}.add"
    cat = width + in_channels
    layers += [
        Conv("skip", INPUT_SITE, ConvDescriptor(in_channels, in_channels, groups=in_channels), bn=True),
        Concat("concat", (prev, "skip")),
        Conv("head.depthwise", "concat", ConvDescriptor(cat, cat, groups=cat), bn=False),
        Conv(
            "head.pointwise",
            "head.depthwise",
            ConvDescriptor(cat, out_channels, kernel=(1, 1)),
            bn=False,
            activation="hardtanh01",
        ),
    ]
    return ArchitectureSpec(tuple(layers), num_blocks, width, in_channels, out_channels)
