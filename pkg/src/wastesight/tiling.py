"""Sliding-window traversal: split a scene into overlapping fixed-size tiles."""

from __future__ import annotations

from dataclasses import dataclass, replace

from .core import ConfigError, DimensionMismatch, RasterImage, Rect, TilePlacement


@dataclass(frozen=True)
class TileGrid:
    """All window placements for one source image, row-major."""

    placements: tuple[TilePlacement, ...]
    source_w: int
    source_h: int
    window_w: int
    window_h: int
    step_x: int
    step_y: int

    def __len__(self) -> int:
        return len(self.placements)


def _axis_positions(extent: int, window: int, step: int) -> list[int]:
    """Window start offsets along one axis: 0, step, ... plus an edge clamp.

    The clamped position (extent - window) is appended only when the last
    regular window leaves uncovered pixels, so positions stay unique.
    """
    positions = list(range(0, extent - window + 1, step))
    if positions[-1] + window < extent:
        positions.append(extent - window)
    return positions


def plan_grid(source_w: int, source_h: int, window_w: int, window_h: int,
              overlap: float) -> TileGrid:
    """Lay out the sliding-window grid; tiles are left unfilled.

    The step per axis is max(1, round(window * (1 - overlap))); the 1-pixel
    floor keeps the grid finite as overlap approaches 1. Placements are the
    cross-product of x- and y-positions in row-major order, and their union
    covers every source pixel.
    """
    if not 1 <= window_w <= source_w:
        raise ConfigError("window_w", f"{window_w} exceeds source width {source_w}")
    if not 1 <= window_h <= source_h:
        raise ConfigError("window_h", f"{window_h} exceeds source height {source_h}")
    if not 0.0 <= overlap < 1.0:
        raise ConfigError("overlap", f"{overlap} not in [0, 1)")

    step_x = max(1, round(window_w * (1.0 - overlap)))
    step_y = max(1, round(window_h * (1.0 - overlap)))
    xs = _axis_positions(source_w, window_w, step_x)
    ys = _axis_positions(source_h, window_h, step_y)

    placements = tuple(
        TilePlacement.for_region(Rect(x, y, window_w, window_h))
        for y in ys
        for x in xs
    )
    return TileGrid(
        placements=placements,
        source_w=source_w,
        source_h=source_h,
        window_w=window_w,
        window_h=window_h,
        step_x=step_x,
        step_y=step_y,
    )


def extract_tiles(image: RasterImage, grid: TileGrid) -> TileGrid:
    """Fill every placement with an exact pixel copy of its region."""
    if image.width != grid.source_w or image.height != grid.source_h:
        raise DimensionMismatch(
            f"grid planned for {grid.source_w}x{grid.source_h}, "
            f"image is {image.width}x{image.height}"
        )
    filled = tuple(
        replace(p, tile=RasterImage(
            image.pixels[p.region.y:p.region.y + p.region.h,
                         p.region.x:p.region.x + p.region.w]))
        for p in grid.placements
    )
    return replace(grid, placements=filled)
