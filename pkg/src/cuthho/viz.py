"""Debug dumps of the cut topology (SVG picture or CSV table)."""

from __future__ import annotations

from .geometry import ILL_CUT, UNCUT, WELL_CUT, CutMesh

_FILL = {
    (UNCUT, 1): "#dce9f5",
    (UNCUT, 2): "#ffffff",
    (WELL_CUT, None): "#fff2c4",
    (ILL_CUT, 1): "#9fd89f",
    (ILL_CUT, 2): "#9fb8e8",
}


def dump_cuts_svg(cm: CutMesh, path: str, size: int = 800) -> None:
    def pt(x, y):
        return f"{x * size:.2f},{(1.0 - y) * size:.2f}"

    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">'
    ]
    for c in cm.cells:
        x0, y0, x1, y1 = cm.mesh.cell_box(c.cid)
        key = (c.kind, c.side if c.kind != WELL_CUT else None)
        fill = _FILL.get(key, "#ffffff")
        lines.append(
            f'<rect x="{x0 * size:.2f}" y="{(1 - y1) * size:.2f}" '
            f'width="{(x1 - x0) * size:.2f}" height="{(y1 - y0) * size:.2f}" '
            f'fill="{fill}" stroke="#888888" stroke-width="0.5"/>'
        )
    for c in cm.cells:
        if c.polyline is not None:
            pts = " ".join(pt(x, y) for x, y in c.polyline)
            lines.append(
                f'<polyline points="{pts}" fill="none" stroke="#cc2222" '
                'stroke-width="1.5"/>'
            )
    for s, t in sorted(cm.pairing.partner.items()):
        a = cm.mesh.cell_center(s)
        b = cm.mesh.cell_center(t)
        lines.append(
            f'<line x1="{a[0] * size:.2f}" y1="{(1 - a[1]) * size:.2f}" '
            f'x2="{b[0] * size:.2f}" y2="{(1 - b[1]) * size:.2f}" '
            'stroke="#222222" stroke-width="1.2" marker-end="url(#arr)"/>'
        )
    lines.insert(1, (
        '<defs><marker id="arr" viewBox="0 0 10 10" refX="9" refY="5" '
        'markerWidth="6" markerHeight="6" orient="auto-start-reverse">'
        '<path d="M 0 0 L 10 5 L 0 10 z" fill="#222222"/></marker></defs>'
    ))
    lines.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(lines))


def dump_cuts_csv(cm: CutMesh, path: str) -> None:
    with open(path, "w") as fh:
        fh.write("cell,kind,side,partner,polyline\n")
        for c in cm.cells:
            partner = cm.pairing.partner.get(c.cid, "")
            poly = ""
            if c.polyline is not None:
                poly = ";".join(f"{x:.16g}:{y:.16g}" for x, y in c.polyline)
            fh.write(f"{c.cid},{c.kind},{c.side or ''},{partner},{poly}\n")


def dump_cuts(cm: CutMesh, path: str) -> None:
    if path.endswith(".csv"):
        dump_cuts_csv(cm, path)
    else:
        dump_cuts_svg(cm, path)
