"""Overlay rendering: GT boxes in green, predictions in red on top.

Labels use Pillow's embedded bitmap font, so output bytes do not depend on
the fonts installed on the machine. PNGs carry no metadata chunks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

from PIL import Image, ImageDraw, ImageFont

from .layout import CategorySet, PageLayout

Color = tuple[int, int, int]


class RenderError(RuntimeError):
    pass


@dataclass(frozen=True)
class RenderStyle:
    gt_color: Color = (0, 255, 0)
    pred_color: Color = (255, 0, 0)
    stroke_width: int = 2
    labels: bool = True
    scale: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "gt_color", tuple(int(c) for c in self.gt_color))
        object.__setattr__(self, "pred_color", tuple(int(c) for c in self.pred_color))
        if self.gt_color == self.pred_color:
            raise ValueError("gt_color and pred_color must differ")
        if self.stroke_width < 1:
            raise ValueError("stroke_width must be at least 1 px")
        if not self.scale > 0:
            raise ValueError("scale must be positive")


_FONT = None


def _font() -> ImageFont.ImageFont:
    global _FONT
    if _FONT is None:
        _FONT = ImageFont.load_default_imagefont()
    return _FONT


def _px(v: float, scale: float) -> int:
    return int(math.floor(v * scale + 0.5))


def canvas_size(layout: PageLayout, scale: float = 1.0) -> tuple[int, int]:
    return (max(1, math.ceil(layout.page_width * scale)), max(1, math.ceil(layout.page_height * scale)))


def _base_image(image, size: tuple[int, int]) -> Image.Image:
    if image is None:
        return Image.new("RGB", size, (255, 255, 255))
    if isinstance(image, Image.Image):
        img = image.copy()
    else:
        try:
            with Image.open(image) as src:
                img = src.convert("RGB")
        except (OSError, ValueError) as exc:
            raise RenderError(f"cannot read base image {image}: {exc}") from exc
    img = img.convert("RGB")
    if img.size != size:
        img = img.resize(size, Image.Resampling.BILINEAR)
    return img


def _draw_layout(draw, layout, color, style, categories) -> None:
    for e in sorted(layout.elements, key=lambda e: e.element_id):
        b = e.bbox
        x1, y1 = _px(b.x1, style.scale), _px(b.y1, style.scale)
        x2 = max(x1, _px(b.x2, style.scale) - 1)
        y2 = max(y1, _px(b.y2, style.scale) - 1)
        draw.rectangle([x1, y1, x2, y2], outline=color, width=style.stroke_width)
        if style.labels:
            name = str(e.category_id)
            if categories is not None and e.category_id in categories:
                name = categories.name(e.category_id)
            draw.text(
                (x1 + style.stroke_width + 1, y1 + style.stroke_width + 1),
                f"{e.element_id} {name}",
                fill=color,
                font=_font(),
            )


def render_overlay(
    gt: PageLayout | None,
    pred: PageLayout | None,
    style: RenderStyle | None = None,
    image=None,
    categories: CategorySet | None = None,
    palette: bool = False,
) -> Image.Image:
    """Draw ``gt`` then ``pred`` over ``image`` (a path or PIL image) or a white page.

    Either layout may be ``None`` to draw one side only. With ``palette=True``
    and no base image the result is a 3-colour indexed image, which encodes
    several times faster than RGB and holds exactly the same pixels.
    """
    style = style or RenderStyle()
    ref = gt if gt is not None else pred
    if ref is None:
        raise ValueError("render_overlay needs at least one layout for the page size")
    size = canvas_size(ref, style.scale)
    if palette and image is None:
        img = Image.new("P", size, 0)
        img.putpalette([255, 255, 255, *style.gt_color, *style.pred_color])
        gt_ink, pred_ink = 1, 2
    else:
        img = _base_image(image, size)
        gt_ink, pred_ink = style.gt_color, style.pred_color
    draw = ImageDraw.Draw(img)
    if gt is not None:
        _draw_layout(draw, gt, gt_ink, style, categories)
    if pred is not None:
        _draw_layout(draw, pred, pred_ink, style, categories)
    return img


def save_png(img: Image.Image, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    img.save(path, format="PNG", compress_level=6)
    return path
