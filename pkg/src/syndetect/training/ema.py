"""Exponential moving average of generator weights.

The EMA copy is what inference uses; the raw weights are kept for resuming.
Update rule, applied after every generator step:

    ema = decay * ema + (1 - decay) * current
"""

from __future__ import annotations

import copy

import torch
import torch.nn as nn


class Ema:
    def __init__(self, module: nn.Module, decay: float = 0.9999):
        self.decay = decay
        self.module = copy.deepcopy(module)
        self.module.eval()
        for p in self.module.parameters():
            p.requires_grad_(False)

    @torch.no_grad()
    def update(self, module: nn.Module) -> None:
        for ema_p, p in zip(self.module.parameters(), module.parameters()):
            ema_p.mul_(self.decay).add_(p, alpha=1.0 - self.decay)
        for ema_b, b in zip(self.module.buffers(), module.buffers()):
            ema_b.copy_(b)

    def state_dict(self) -> dict:
        return self.module.state_dict()

    def load_state_dict(self, state: dict) -> None:
        self.module.load_state_dict(state)
