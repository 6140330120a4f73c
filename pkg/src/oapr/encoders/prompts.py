"""Learnable prompt parameters: the body prompt bank and the shared context."""

from __future__ import annotations

import numpy as np
import torch
from torch import nn

PROMPT_INIT_STD = 0.02


class BodyPromptBank(nn.Module):
    """N learnable vision prompt tokens, one per body-part class."""

    def __init__(self, n_prompts: int = 4, width: int = 32, seed: int = 0,
                 dtype: torch.dtype = torch.float32):
        super().__init__()
        if n_prompts < 1:
            raise ValueError("need at least one body prompt")
        rng = np.random.default_rng(seed)
        init = rng.normal(0.0, PROMPT_INIT_STD, size=(n_prompts, width))
        self.tokens = nn.Parameter(torch.as_tensor(init, dtype=dtype))

    @property
    def n_prompts(self) -> int:
        return self.tokens.shape[0]


class AttributeContextPrompt(nn.Module):
    """Learnable token prefix shared by every attribute phrase."""

    def __init__(self, length: int = 66, width: int = 32, seed: int = 1,
                 dtype: torch.dtype = torch.float32):
        super().__init__()
        if length < 1:
            raise ValueError("context prompt needs at least one token")
        rng = np.random.default_rng(seed)
        init = rng.normal(0.0, PROMPT_INIT_STD, size=(length, width))
        self.tokens = nn.Parameter(torch.as_tensor(init, dtype=dtype))

    @property
    def length(self) -> int:
        return self.tokens.shape[0]
