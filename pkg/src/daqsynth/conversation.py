"""Conversation history with the two policies the session flow relies on.

The model is stateless, so every request resends the history. Two rules keep
that history lean: after the architecture is accepted, all rejected diagram
attempts (and the feedback that rejected them) are pruned; and each block's
detailing starts from a fork that ends at the accepted architecture, so block
details never leak into one another.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import ConsistencyError, StateError
from .gateway import ChatMessage

ARCHITECTURE_ACCEPTED = "architecture_accepted"

_DIGRAPH_RE = re.compile(r"\bdigraph\b")


@dataclass
class Conversation:
    messages: list[ChatMessage] = field(default_factory=list)
    markers: dict[str, int] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.messages)

    def append(self, msg: ChatMessage) -> None:
        self.messages.append(msg)

    def set_marker(self, label: str, index: int) -> None:
        if not 0 <= index < len(self.messages):
            raise ConsistencyError(
                f"marker index {index} outside conversation of length {len(self.messages)}"
            )
        self.markers[label] = index

    def prune_architecture_loop(self, accepted_dot: str) -> None:
        """Remove rejected diagram attempts and their paired feedback messages.

        Keeps the Q&A exchange that preceded the first diagram, keeps exactly
        one assistant message containing `accepted_dot`, and points the
        `architecture_accepted` marker at it.
        """
        needle = accepted_dot.strip()
        if not needle:
            raise ConsistencyError("accepted architecture payload is empty")
        accepted_idx = None
        for i, msg in enumerate(self.messages):
            if msg.role == "assistant" and needle in msg.content:
                accepted_idx = i  # last occurrence wins: the accepted attempt
        if accepted_idx is None:
            raise ConsistencyError("accepted architecture not found in conversation")

        removals: set[int] = set()
        for i, msg in enumerate(self.messages):
            if i == accepted_idx or msg.role != "assistant":
                continue
            if _DIGRAPH_RE.search(msg.content):
                removals.add(i)
                if i + 1 < len(self.messages) and self.messages[i + 1].role == "user":
                    removals.add(i + 1)  # the feedback that rejected this attempt

        kept: list[ChatMessage] = []
        remap: dict[int, int] = {}
        for i, msg in enumerate(self.messages):
            if i in removals:
                continue
            remap[i] = len(kept)
            kept.append(msg)
        self.messages = kept
        self.markers = {
            label: remap[idx] for label, idx in self.markers.items() if idx in remap
        }
        self.markers[ARCHITECTURE_ACCEPTED] = remap[accepted_idx]

    def fork_for_detailing(self) -> "Conversation":
        """Independent copy ending at the accepted architecture.

        Every detail stage starts from an identical fork; nothing appended to
        a fork ever reaches this conversation or another fork.
        """
        cut = self.markers.get(ARCHITECTURE_ACCEPTED)
        if cut is None:
            raise StateError("no accepted architecture to fork from")
        return Conversation(
            messages=list(self.messages[: cut + 1]),
            markers={label: idx for label, idx in self.markers.items() if idx <= cut},
        )

    def dot_payload_count(self) -> int:
        return sum(1 for m in self.messages if _DIGRAPH_RE.search(m.content))
