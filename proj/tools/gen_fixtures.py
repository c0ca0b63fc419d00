#!/usr/bin/env python3
"""Regenerate the bundled fixtures under fixtures/.

    python3 tools/gen_fixtures.py [outdir]

Netlists use the emgrid card grammar; thermal maps are `x0 y0 dx dy nx ny`
followed by ny CSV rows.
"""
import math
import sys
from pathlib import Path

RHO_CU = 2.2e-8


def fmt(v):
    return f"{v:.12g}"


def resistance(w_um, h_um, l_um, rho=RHO_CU):
    return rho * l_um * 1e-6 / (w_um * 1e-6 * h_um * 1e-6)


class Netlist:
    def __init__(self, title):
        self.lines = [f"* {title}"]

    def node(self, name, x, y, layer, net="VDD"):
        self.lines.append(f"N{name} x={fmt(x)} y={fmt(y)} layer={layer} net={net}")

    def wire(self, name, a, b, w, h, l, layer):
        self.lines.append(
            f"R{name} {a} {b} {fmt(resistance(w, h, l))} ; W={fmt(w)} H={fmt(h)} L={fmt(l)} layer={layer}")

    def via(self, name, lower, upper, r):
        self.lines.append(f"VIA{name} {lower} {upper} {fmt(r)}")

    def pad(self, name, node, volts):
        self.lines.append(f"V{name} {node} 0 {fmt(volts)}")

    def load(self, name, node, amps):
        self.lines.append(f"I{name} {node} 0 {fmt(amps)}")

    def text(self):
        return "\n".join(self.lines + [".end", ""])


def single_wire():
    n = Netlist("single 50 um M1 wire, pad at a, 1 mA load at b")
    n.node("a", 0, 0, 1)
    n.node("b", 50, 0, 1)
    n.wire("w", "a", "b", 0.5, 0.2, 50, 1)
    n.pad("dd", "a", 1.0)
    n.load("0", "b", 1.0e-3)
    return n.text()


def mesh(size, pitch, w, h, pads, loads, via_r, title, via_at=lambda r, c: True):
    n = Netlist(title)
    for r in range(size):
        for c in range(size):
            n.node(f"m1_{r}_{c}", c * pitch, r * pitch, 1)
    for r in range(size):
        for c in range(size):
            n.node(f"m2_{r}_{c}", c * pitch, r * pitch, 2)
    for r in range(size):
        for c in range(size - 1):
            n.wire(f"h_{r}_{c}", f"m1_{r}_{c}", f"m1_{r}_{c + 1}", w, h, pitch, 1)
    for c in range(size):
        for r in range(size - 1):
            n.wire(f"v_{r}_{c}", f"m2_{r}_{c}", f"m2_{r + 1}_{c}", w, h, pitch, 2)
    for r in range(size):
        for c in range(size):
            if via_at(r, c):
                n.via(f"_{r}_{c}", f"m1_{r}_{c}", f"m2_{r}_{c}", via_r)
    for k, (r, c) in enumerate(pads):
        n.pad(f"dd{k}", f"m2_{r}_{c}", 1.0)
    for (r, c), amps in loads:
        n.load(f"_{r}_{c}", f"m1_{r}_{c}", amps)
    return n.text()


def mesh4x4():
    pads = [(0, 0), (0, 3), (3, 0), (3, 3)]
    loads = [((r, c), 2.0e-3) for r in (1, 2) for c in (1, 2)]
    return mesh(4, 20.0, 0.5, 0.2, pads, loads, 0.5, "4x4 two-layer mesh: 8 trees")


M0_SIZE = 34
M0_PITCH = 10.0
M0_PADS = [(5, 5), (5, 28), (28, 5), (28, 28)]


M0_BLOCK = range(11, 23)  # rows/columns of the 4x load block in the middle of the die


def m0like():
    loads = []
    for r in range(M0_SIZE):
        for c in range(M0_SIZE):
            scale = 4.0 if r in M0_BLOCK and c in M0_BLOCK else 1.0
            loads.append(((r, c), 15.0e-6 * scale))
    # Vias on a checkerboard: each layer reaches the other only at every
    # second crossing, so currents spread along the stripes.
    return mesh(M0_SIZE, M0_PITCH, 0.25, 0.2, M0_PADS, loads, 0.5,
                "synthetic 34+34 stripe power grid, 68 trees of 33 segments",
                via_at=lambda r, c: (r + c) % 2 == 0)


def thermal_map(fn, mean=358.0):
    """Map over the m0like die with a 10 um pitch, shifted to the given mean."""
    nx = ny = M0_SIZE + 2
    x0 = y0 = -M0_PITCH
    vals = [[fn(x0 + c * M0_PITCH, y0 + r * M0_PITCH) for c in range(nx)] for r in range(ny)]
    avg = sum(map(sum, vals)) / (nx * ny)
    vals = [[v - avg + mean for v in row] for row in vals]
    lines = [f"{fmt(x0)} {fmt(y0)} {fmt(M0_PITCH)} {fmt(M0_PITCH)} {nx} {ny}"]
    lines += [",".join(f"{v:.6f}" for v in row) for row in vals]
    return "\n".join(lines) + "\n"


SPAN = (M0_SIZE - 1) * M0_PITCH
CENTER = 0.5 * SPAN


def uniform(x, y):
    return 358.0


def gradient(x, y):
    return 358.0 + 6.0 * (x - CENTER) / CENTER


def hotspot(x, y):
    d2 = (x - CENTER) ** 2 + (y - CENTER) ** 2
    return 358.0 + 25.0 * math.exp(-d2 / (2 * 45.0 ** 2))


PARAMS = """\
# Fixture parameters. Activation energy is lowered from the 0.8 eV default
# so that nucleation happens well within a 1e9 s horizon at fixture
# currents; the critical void is 0.2% of the segment length.
z_eff = 10
omega = 1.182e-29
bulk_modulus = 1e11
d0 = 1.3e-9
ea = 0.7
kb = 8.617333262e-5
q_heat = 0.1
delta = 1e-9
sigma_crit = 5e8
sigma_t = 0
rho_cu = 2.2e-8
rho_ta = 2e-6
h_ta = 5e-9
void_crit_frac = 0.002
polarity = 1

k_cu = 400
k_ild = 0.5
t_ild = 1e-6
t_ambient = 358

t_total = 1e9
t_start = 1
steps_per_decade = 50
checkpoints_per_decade = 10
ir_fail_frac = 0.1
dr_fail_frac = 10
"""

M0_PARAMS = PARAMS.replace("void_crit_frac = 0.002", "void_crit_frac = 0.01").replace(
    "ir_fail_frac = 0.1", "ir_fail_frac = 0.07").replace(
    "steps_per_decade = 50", "steps_per_decade = 400") + """
# Coarser stress mesh for the 2312-node grid and finer log steps, so that
# halving the step moves every nucleation time by under 1%; the run ends at
# the first IR-drop failure.
dx_frac = 0.1
stop_at_failure = true
"""


def main():
    out = Path(sys.argv[1] if len(sys.argv) > 1 else Path(__file__).resolve().parent.parent / "fixtures")
    out.mkdir(parents=True, exist_ok=True)
    files = {
        "single_wire.sp": single_wire(),
        "mesh4x4.sp": mesh4x4(),
        "m0like.sp": m0like(),
        "m0like_uniform.tmap": thermal_map(uniform),
        "m0like_gradient.tmap": thermal_map(gradient),
        "m0like_hotspot.tmap": thermal_map(hotspot),
        "fixture.params": PARAMS,
        "m0like.params": M0_PARAMS,
    }
    for name, text in files.items():
        (out / name).write_text(text)
        print(f"wrote {out / name}")


if __name__ == "__main__":
    main()
