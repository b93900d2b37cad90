"""Regenerate the shipped PDK preset files.

Coupler lengths follow ``length = a * N**p`` per port count N; the
coefficients below were tuned by hand so the manual designs land near the
reference optical areas and latencies in tests/table_data.py.
"""

from pathlib import Path

OUT = Path(__file__).resolve().parents[1] / "src" / "ptc_forge" / "presets"


def dc_table(a, p, il0, il_per_port, max_ports=64):
    lines = []
    for n in range(2, max_ports + 1):
        lines.append(f'[dc."{n}"]')
        lines.append(f"length = {a * n ** p:.3f}")
        lines.append(f"insertion_loss = {il0 + il_per_port * (n - 2):.3f}")
        lines.append("")
    return "\n".join(lines)


def render(name, header, ps, dc, cr, y, spacing, electrical, optics, system):
    def section(title, values):
        body = "\n".join(f"{k} = {v!r}" for k, v in values.items())
        return f"[{title}]\n{body}\n"

    return "\n".join([
        header,
        f'name = "{name}"\n',
        section("ps", ps),
        section("cr", cr),
        section("ybranch", y),
        section("spacing", spacing),
        section("electrical", electrical),
        section("optics", optics),
        section("system", system),
        dc,
    ])


GF = dict(
    ps=dict(length=50.0, width=30.0, insertion_loss=0.1, static_power=0.0),
    dc=dict(a=13.35, p=1.671, il0=0.3, il_per_port=0.02),
    cr=dict(length=10.0, width=10.0, insertion_loss=0.1),
    y=dict(length=36.7, insertion_loss=0.1),
    spacing=dict(dl=20.0, dw=100.0, dl_cr=12.7, dw_cr=5.8),
    electrical=dict(a_tia=0.02, a_pd=0.0025, a_mzm=0.5, a_dac=0.2, a_adc=0.3,
                    p_mzm=3.888, p_tia=3.0, p_pd=0.5, p_dac0=26.0, p_adc0=3.5,
                    b0=8, f_s=10.0, tau_dac=10.0, tau_pd=10.0),
    optics=dict(eta=0.2, s_pd=-25.0, n_g=3.55, c0=299.792458),
    system=dict(f=10.0, b=4),
)

CUSTOM = dict(
    ps=dict(length=13.0, width=4.6, insertion_loss=0.05, static_power=0.0),
    dc=dict(a=10.67, p=1.68, il0=0.2, il_per_port=0.02),
    cr=dict(length=10.0, width=10.0, insertion_loss=0.05),
    y=dict(length=8.8, insertion_loss=0.05),
    spacing=dict(dl=5.0, dw=120.0, dl_cr=2.0, dw_cr=2.0),
    electrical=dict(a_tia=0.0015, a_pd=0.000125, a_mzm=0.01, a_dac=0.004, a_adc=0.005,
                    p_mzm=0.962, p_tia=3.0, p_pd=0.5, p_dac0=26.0, p_adc0=3.0,
                    b0=8, f_s=10.0, tau_dac=10.0, tau_pd=10.0),
    optics=dict(eta=0.2, s_pd=-25.0, n_g=4.3, c0=299.792458),
    system=dict(f=10.0, b=4),
)


def write(name, params, header):
    text = render(
        name, header, params["ps"], dc_table(**params["dc"]), params["cr"], params["y"],
        params["spacing"], params["electrical"], params["optics"], params["system"],
    )
    (OUT / f"{name}.toml").write_text(text)


if __name__ == "__main__":
    write("gf", GF, "# GF-like silicon photonics PDK (calibrated stand-in; foundry values are not public).")
    write("custom", CUSTOM, "# Compact customized PDK stand-in with small electrical front-ends.")
