from __future__ import annotations

from dataclasses import dataclass

from coarsefine.errors import InvalidInputError


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box in 0-based continuous pixel coordinates.

    ``(x, y)`` is the top-left corner, so pixel ``(0, 0)`` spans ``[0, 1)``
    and the box center is ``(x + w/2, y + h/2)``.
    """

    x: float
    y: float
    w: float
    h: float

    @classmethod
    def from_center(cls, cx: float, cy: float, w: float, h: float) -> BoundingBox:
        return cls(cx - w / 2.0, cy - h / 2.0, w, h)

    @property
    def center(self) -> tuple[float, float]:
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)

    @property
    def size(self) -> tuple[float, float]:
        return (self.w, self.h)

    @property
    def area(self) -> float:
        return self.w * self.h

    def is_valid(self) -> bool:
        return self.w > 0 and self.h > 0

    def validate(self) -> BoundingBox:
        if not self.is_valid():
            raise InvalidInputError(f"box must have positive area, got {self}")
        return self

    def recenter(self, cx: float, cy: float) -> BoundingBox:
        return BoundingBox.from_center(cx, cy, self.w, self.h)

    def resized(self, w: float, h: float) -> BoundingBox:
        cx, cy = self.center
        return BoundingBox.from_center(cx, cy, w, h)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x, self.y, self.w, self.h)
