"""Deep metric rejector: twin feature extractors plus a small decision head.

F_real embeds real images and F_syn embeds syntheses (their distributions
differ slightly, hence two trunks). Each produces a 1280-d globally pooled,
L2-normalized embedding; the head consumes the 2560-d concatenation and emits
two logits (similar, dissimilar).
"""

from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F

from ..core.errors import ShapeError

EMBED_DIM = 1280
SIMILAR, DISSIMILAR = 0, 1


class _ResBlock(nn.Module):
    def __init__(self, c_in: int, c_out: int, down: bool):
        super().__init__()
        stride = 2 if down else 1
        self.conv1 = nn.Conv2d(c_in, c_out, 3, stride=stride, padding=1, bias=False)
        self.bn1 = nn.BatchNorm2d(c_out)
        self.conv2 = nn.Conv2d(c_out, c_out, 3, padding=1, bias=False)
        self.bn2 = nn.BatchNorm2d(c_out)
        self.skip = nn.Sequential()
        if down or c_in != c_out:
            self.skip = nn.Sequential(nn.Conv2d(c_in, c_out, 1, stride=stride, bias=False), nn.BatchNorm2d(c_out))

    def forward(self, x):
        h = F.relu(self.bn1(self.conv1(x)))
        h = self.bn2(self.conv2(h))
        return F.relu(h + self.skip(x))


class FeatureExtractor(nn.Module):
    """Compact residual trunk with a 1280-d global-pooled embedding."""

    def __init__(self, width: int = 32):
        super().__init__()
        w = width
        self.stem = nn.Sequential(nn.Conv2d(3, w, 3, padding=1, bias=False), nn.BatchNorm2d(w), nn.ReLU())
        self.blocks = nn.Sequential(
            _ResBlock(w, 2 * w, down=True),
            _ResBlock(2 * w, 4 * w, down=True),
            _ResBlock(4 * w, 4 * w, down=True),
        )
        self.proj = nn.Conv2d(4 * w, EMBED_DIM, 1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.ndim != 4 or tuple(x.shape[1:]) != (3, 32, 32):
            raise ShapeError(f"feature extractor expects (n, 3, 32, 32), got {tuple(x.shape)}")
        h = self.proj(self.blocks(self.stem(x)))
        emb = F.adaptive_avg_pool2d(h, 1).flatten(1)
        return F.normalize(emb, dim=1)


class FeatureExtractorPair(nn.Module):
    def __init__(self, width: int = 32):
        super().__init__()
        self.f_real = FeatureExtractor(width)
        self.f_syn = FeatureExtractor(width)

    def embed(self, x: torch.Tensor, x_syn: torch.Tensor) -> torch.Tensor:
        if x.shape != x_syn.shape:
            raise ShapeError("metric pair: input and synthesis shapes differ")
        return torch.cat([self.f_real(x), self.f_syn(x_syn)], dim=1)


class MetricHead(nn.Module):
    """Three fully connected layers 2560 -> 512 -> 64 -> 2, dropout 0.1."""

    def __init__(self, dropout: float = 0.1):
        super().__init__()
        self.fc1 = nn.Linear(2 * EMBED_DIM, 512)
        self.fc2 = nn.Linear(512, 64)
        self.fc3 = nn.Linear(64, 2)
        self.drop = nn.Dropout(dropout)

    def forward(self, embedding: torch.Tensor) -> torch.Tensor:
        h = F.relu(self.drop(self.fc1(embedding)))
        h = F.relu(self.drop(self.fc2(h)))
        return self.fc3(h)


def dmm_score(
    pair: FeatureExtractorPair, head: MetricHead, x: torch.Tensor, x_syn: torch.Tensor
) -> torch.Tensor:
    """Softmax probability of the 'dissimilar' class, shape (n,)."""
    logits = head(pair.embed(x, x_syn))
    return F.softmax(logits, dim=1)[:, DISSIMILAR]


def triplet_loss(
    anchor: torch.Tensor, positive: torch.Tensor, negative: torch.Tensor, margin: float = 0.2
) -> torch.Tensor:
    """Triplet margin loss on embeddings (margin 0.2)."""
    d_pos = (anchor - positive).pow(2).sum(1)
    d_neg = (anchor - negative).pow(2).sum(1)
    return F.relu(d_pos - d_neg + margin).mean()
