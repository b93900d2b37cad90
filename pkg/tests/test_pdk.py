import json

import pytest

from ptc_forge.errors import InvalidPdk, MissingPdkEntry
from ptc_forge.pdk import PRESETS, Coupler, Optics, load_pdk, pdk_from_dict


@pytest.mark.parametrize("name", PRESETS)
def test_presets_load_and_cover_search_ports(name):
    pdk = load_pdk(name)
    for n in (2, 4, 8, 16):
        assert pdk.coupler(n).length > 0


def test_one_port_slot_is_free(gf):
    c = gf.coupler(1)
    assert c.length == 0 and c.insertion_loss == 0


def test_missing_coupler_raises(gf):
    with pytest.raises(MissingPdkEntry):
        gf.coupler(65)


def test_dict_round_trip(gf):
    assert pdk_from_dict(gf.to_dict()) == gf


@pytest.mark.parametrize("suffix", [".json", ".toml"])
def test_file_round_trip(tmp_path, gf, suffix):
    data = gf.to_dict()
    path = tmp_path / f"p{suffix}"
    if suffix == ".json":
        path.write_text(json.dumps(data))
    else:
        lines = []
        for section, body in data.items():
            if section in ("dc", "name"):
                continue
            lines.append(f"[{section}]")
            lines += [f"{k} = {v!r}" for k, v in body.items()]
        lines.insert(0, f'name = "{data["name"]}"')
        for n, c in data["dc"].items():
            lines.append(f'[dc."{n}"]')
            lines += [f"{k} = {v!r}" for k, v in c.items()]
        path.write_text("\n".join(lines) + "\n")
    assert load_pdk(path) == gf


def test_missing_file(tmp_path):
    with pytest.raises(InvalidPdk):
        load_pdk(tmp_path / "nope.toml")


def test_unparseable_file(tmp_path):
    path = tmp_path / "bad.toml"
    path.write_text("ps = [unterminated")
    with pytest.raises(InvalidPdk):
        load_pdk(path)


def test_unknown_field_rejected(gf):
    data = gf.to_dict()
    data["ps"]["colour"] = 3
    with pytest.raises(InvalidPdk):
        pdk_from_dict(data)


@pytest.mark.parametrize("section,field,value", [
    ("ps", "length", 0.0),
    ("optics", "eta", 1.5),
    ("optics", "eta", 0.0),
    ("system", "b", 0),
    ("electrical", "p_tia", -1.0),
])
def test_validation(gf, section, field, value):
    data = gf.to_dict()
    data[section][field] = value
    with pytest.raises(InvalidPdk):
        pdk_from_dict(data)


def test_replace_revalidates(gf):
    with pytest.raises(InvalidPdk):
        gf.replace(optics=Optics(eta=2.0, s_pd=-25, n_g=4))
    ok = gf.replace(dc={2: Coupler(10.0, 0.1)})
    assert ok.coupler(2).length == 10.0
