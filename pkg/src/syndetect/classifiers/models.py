"""Target classifier architectures.

The small CNN is pinned to exactly two convolutional and two fully connected
layers: conv(1->32, 5x5) -> relu -> maxpool2 -> conv(32->64, 5x5) -> relu ->
maxpool2 -> fc(1024->200) -> relu -> fc(200->classes), which requires 28x28
inputs. The residual net uses the usual 3x3-stem variant for 32x32 inputs;
DenseNet-169 comes from torchvision.
"""

from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F

from ..core.errors import ConfigurationError, ShapeError

ARCHITECTURES = ("small_cnn_2conv2fc", "residual_18", "dense_169", "external_robust")


class _Normalize(nn.Module):
    """Centering lives inside the classifier so budgets stay in raw pixels."""

    def __init__(self, channels: int):
        super().__init__()
        self.register_buffer("mean", torch.full((1, channels, 1, 1), 0.5))
        self.register_buffer("std", torch.full((1, channels, 1, 1), 0.5))

    def forward(self, x):
        return (x - self.mean) / self.std


class SmallCNN(nn.Module):
    expected_input = (1, 28, 28)

    def __init__(self, num_classes: int = 10):
        super().__init__()
        self.norm = _Normalize(1)
        self.conv1 = nn.Conv2d(1, 32, 5)
        self.conv2 = nn.Conv2d(32, 64, 5)
        self.fc1 = nn.Linear(1024, 200)
        self.fc2 = nn.Linear(200, num_classes)

    def forward(self, x):
        x = self.norm(x)
        x = F.max_pool2d(F.relu(self.conv1(x)), 2)
        x = F.max_pool2d(F.relu(self.conv2(x)), 2)
        x = x.flatten(1)
        return self.fc2(F.relu(self.fc1(x)))


class _BasicBlock(nn.Module):
    def __init__(self, c_in: int, c_out: int, stride: int = 1):
        super().__init__()
        self.conv1 = nn.Conv2d(c_in, c_out, 3, stride=stride, padding=1, bias=False)
        self.bn1 = nn.BatchNorm2d(c_out)
        self.conv2 = nn.Conv2d(c_out, c_out, 3, padding=1, bias=False)
        self.bn2 = nn.BatchNorm2d(c_out)
        self.shortcut = nn.Sequential()
        if stride != 1 or c_in != c_out:
            self.shortcut = nn.Sequential(
                nn.Conv2d(c_in, c_out, 1, stride=stride, bias=False), nn.BatchNorm2d(c_out)
            )

    def forward(self, x):
        out = F.relu(self.bn1(self.conv1(x)))
        out = self.bn2(self.conv2(out))
        return F.relu(out + self.shortcut(x))


class ResNet18(nn.Module):
    expected_input = (3, 32, 32)

    def __init__(self, num_classes: int = 10, width: int = 64):
        super().__init__()
        self.norm = _Normalize(3)
        w = width
        self.stem = nn.Sequential(nn.Conv2d(3, w, 3, padding=1, bias=False), nn.BatchNorm2d(w), nn.ReLU())
        layers = []
        c_in = w
        for i, (c_out, stride) in enumerate([(w, 1), (2 * w, 2), (4 * w, 2), (8 * w, 2)]):
            layers += [_BasicBlock(c_in, c_out, stride), _BasicBlock(c_out, c_out)]
            c_in = c_out
        self.layers = nn.Sequential(*layers)
        self.head = nn.Linear(8 * w, num_classes)

    def forward(self, x):
        x = self.stem(self.norm(x))
        x = self.layers(x)
        x = F.adaptive_avg_pool2d(x, 1).flatten(1)
        return self.head(x)


class DenseNet169(nn.Module):
    expected_input = (3, 32, 32)

    def __init__(self, num_classes: int = 10):
        super().__init__()
        from torchvision.models import densenet169

        self.norm = _Normalize(3)
        self.net = densenet169(weights=None, num_classes=num_classes)

    def forward(self, x):
        return self.net(self.norm(x))


class Classifier(nn.Module):
    """A trained target model plus the metadata needed to validate its inputs."""

    def __init__(
        self,
        architecture: str,
        num_classes: int,
        net: nn.Module,
        dataset: str = "",
        width: int | None = None,
    ):
        super().__init__()
        if architecture not in ARCHITECTURES:
            raise ConfigurationError(f"unknown architecture {architecture!r}")
        self.architecture = architecture
        self.num_classes = num_classes
        self.dataset = dataset
        self.width = width
        self.net = net

    @property
    def expected_input(self) -> tuple[int, int, int]:
        return self.net.expected_input

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.ndim != 4 or tuple(x.shape[1:]) != self.expected_input:
            raise ShapeError(
                f"classifier expects (n, {', '.join(map(str, self.expected_input))}), got {tuple(x.shape)}"
            )
        return self.net(x)


def build_classifier(
    architecture: str,
    num_classes: int,
    dataset: str = "",
    width: int | None = None,
) -> Classifier:
    if architecture == "small_cnn_2conv2fc":
        net: nn.Module = SmallCNN(num_classes)
    elif architecture == "residual_18":
        net = ResNet18(num_classes, width=width or 64)
    elif architecture == "dense_169":
        net = DenseNet169(num_classes)
    else:
        raise ConfigurationError(f"unknown architecture {architecture!r}")
    return Classifier(architecture, num_classes, net, dataset=dataset, width=width)
