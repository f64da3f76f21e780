"""Regenerate the deterministic fixture corpus, QA set, search index and config.

Usage: python3 scripts/make_fixtures.py [fixtures_dir]
"""

from __future__ import annotations

import json
import random
import struct
import sys
import zlib
from pathlib import Path

from kgrag.providers import load_lexicon

FAMILIES = {
    "ammonia": [
        ("natural gas", "feeds the", "primary reformer"),
        ("primary reformer", "produces", "syngas"),
        ("nickel catalyst", "promotes reforming in the", "primary reformer"),
        ("syngas", "passes to the", "secondary reformer"),
        ("air", "supplies nitrogen to the", "secondary reformer"),
        ("secondary reformer", "discharges into the", "shift converter"),
        ("shift converter", "converts", "carbon monoxide"),
        ("co2 absorber", "removes", "carbon dioxide"),
        ("methanator", "cleans", "syngas"),
        ("synthesis compressor", "pressurizes", "syngas"),
        ("ammonia converter", "uses", "iron catalyst"),
        ("ammonia converter", "yields", "ammonia"),
        ("refrigeration chiller", "condenses", "ammonia"),
        ("ammonia", "is stored as", "anhydrous ammonia"),
        ("anhydrous ammonia", "is the feedstock for", "urea"),
        ("waste heat boiler", "raises", "high pressure steam"),
        ("temperature controller", "regulates the", "ammonia converter"),
        ("purge gas", "leaves the", "ammonia synthesis loop"),
    ],
    "methanol": [
        ("natural gas", "feeds the", "steam reformer"),
        ("steam reformer", "produces", "syngas"),
        ("steam", "is mixed into the", "steam reformer"),
        ("syngas", "flows to the", "methanol reactor"),
        ("methanol reactor", "uses", "copper zinc catalyst"),
        ("methanol reactor", "yields", "methanol"),
        ("flash drum", "separates", "methanol"),
        ("flash drum", "vents", "purge gas"),
        ("methanol", "enters the", "methanol distillation column"),
        ("methanol distillation column", "delivers", "fuel grade methanol"),
        ("cooling water", "cools the", "methanol reactor"),
        ("pressure controller", "holds the", "flash drum"),
        ("purge gas", "becomes", "fuel gas"),
        ("heat exchanger", "preheats", "syngas"),
    ],
    "refining": [
        ("crude oil", "enters the", "desalter"),
        ("desalter", "removes", "sodium chloride"),
        ("crude heater", "warms", "crude oil"),
        ("crude oil", "feeds the", "atmospheric distillation column"),
        ("atmospheric distillation column", "separates", "naphtha"),
        ("atmospheric distillation column", "draws off", "kerosene"),
        ("atmospheric distillation column", "draws off", "diesel"),
        ("atmospheric distillation column", "leaves", "atmospheric residue"),
        ("atmospheric residue", "feeds the", "vacuum distillation column"),
        ("vacuum distillation column", "produces", "gas oil"),
        ("vacuum distillation column", "rejects", "vacuum residue"),
        ("naphtha stabilizer", "recovers", "lpg"),
        ("hydrotreater", "removes sulfur from", "diesel"),
        ("hydrotreater", "uses", "cobalt molybdenum catalyst"),
        ("naphtha", "is blended into", "gasoline"),
        ("kerosene", "is treated into", "jet fuel"),
        ("level controller", "controls the", "desalter"),
        ("steam", "strips the", "atmospheric distillation column"),
    ],
    "lithium": [
        ("spodumene", "is calcined in the", "rotary kiln"),
        ("rotary kiln", "feeds the", "acid roaster"),
        ("sulfuric acid", "reacts in the", "acid roaster"),
        ("acid roaster", "produces", "lithium sulfate"),
        ("lithium sulfate", "dissolves in the", "leach tank"),
        ("leach tank", "discharges to the", "filter press"),
        ("lime", "is dosed into the", "leach tank"),
        ("filter press", "rejects", "calcium sulfate"),
        ("ion exchange unit", "purifies", "lithium sulfate"),
        ("lithium sulfate", "reacts with", "sodium hydroxide"),
        ("crystallizer", "yields", "lithium hydroxide"),
        ("crystallizer", "returns", "mother liquor"),
        ("centrifuge", "dewaters", "lithium hydroxide"),
        ("rotary dryer", "dries", "lithium hydroxide"),
        ("lithium hydroxide", "is sold as", "battery grade lithium hydroxide"),
        ("evaporator", "concentrates", "mother liquor"),
        ("mother liquor", "carries", "sodium sulfate"),
        ("ph analyzer", "monitors the", "leach tank"),
    ],
    "sulfuric": [
        ("sulfur", "burns in the", "sulfur furnace"),
        ("air", "is dried in the", "drying tower"),
        ("drying tower", "supplies", "air"),
        ("sulfur furnace", "produces", "sulfur dioxide"),
        ("waste heat boiler", "cools", "sulfur dioxide"),
        ("sulfur dioxide", "enters the", "converter bed"),
        ("converter bed", "uses", "vanadium pentoxide"),
        ("converter bed", "produces", "sulfur trioxide"),
        ("sulfur trioxide", "is absorbed in the", "absorption tower"),
        ("absorption tower", "yields", "oleum"),
        ("oleum", "is diluted into", "concentrated sulfuric acid"),
        ("concentrated sulfuric acid", "supplies", "acid roaster"),
        ("waste heat boiler", "raises", "steam"),
        ("oxygen analyzer", "samples", "flue gas"),
        ("cooling tower", "supplies", "cooling water"),
    ],
    "chloralkali": [
        ("sodium chloride", "dissolves in the", "brine saturator"),
        ("brine saturator", "produces", "brine"),
        ("brine", "is polished in the", "ion exchange unit"),
        ("brine", "feeds the", "electrolyzer"),
        ("electrolyzer", "contains the", "membrane cell"),
        ("electricity", "drives the", "electrolyzer"),
        ("membrane cell", "releases", "chlorine"),
        ("membrane cell", "releases", "hydrogen"),
        ("membrane cell", "produces", "sodium hydroxide"),
        ("chlorine", "is dried in the", "chlorine dryer"),
        ("chlorine dryer", "uses", "sulfuric acid"),
        ("chlorine compressor", "delivers", "chlorine gas"),
        ("hydrogen", "is cooled into", "hydrogen gas"),
        ("caustic evaporator", "concentrates", "sodium hydroxide"),
        ("sodium hydroxide", "is sold as", "caustic soda"),
        ("flow controller", "meters", "brine"),
    ],
    "ethylene": [
        ("ethane", "feeds the", "cracking furnace"),
        ("naphtha", "feeds the", "cracking furnace"),
        ("steam", "dilutes the", "cracking furnace"),
        ("cracking furnace", "discharges to the", "transfer line exchanger"),
        ("transfer line exchanger", "raises", "high pressure steam"),
        ("quench tower", "condenses", "pyrolysis gasoline"),
        ("cracked gas compressor", "feeds the", "caustic scrubber"),
        ("caustic scrubber", "uses", "sodium hydroxide"),
        ("caustic scrubber", "removes", "carbon dioxide"),
        ("cold box", "chills", "ethylene"),
        ("demethanizer", "removes", "methane"),
        ("demethanizer", "feeds the", "deethanizer"),
        ("deethanizer", "feeds the", "ethylene splitter"),
        ("ethylene splitter", "yields", "polymer grade ethylene"),
        ("ethylene splitter", "recycles", "ethane"),
        ("refrigerant", "cools the", "cold box"),
        ("gas chromatograph", "analyzes", "ethylene"),
        ("propylene", "is upgraded to", "polymer grade propylene"),
    ],
}

TITLES = {
    "ammonia": "Ammonia synthesis",
    "methanol": "Methanol production",
    "refining": "Crude oil refining",
    "lithium": "Lithium hydroxide production",
    "sulfuric": "Sulfuric acid contact process",
    "chloralkali": "Chlor-alkali electrolysis",
    "ethylene": "Ethylene steam cracking",
}

FILLER = [
    "Operators review the shift log before every start-up.",
    "The unit follows the plant safety procedure.",
    "Maintenance is scheduled during the annual turnaround.",
    "Design capacity is reported in tonnes per day.",
    "Energy integration lowers the specific consumption.",
]

COMMON = [
    ("pump", "transfers", "boiler feed water"),
    ("boiler feed water", "feeds the", "waste heat boiler"),
    ("pressure relief valve", "protects the", "storage tank"),
    ("control valve", "throttles", "cooling water"),
    ("instrument air", "actuates the", "control valve"),
    ("thermocouple", "measures the", "heat exchanger"),
    ("nitrogen blanket", "covers the", "storage tank"),
]

DOCS_PER_FAMILY = 14

QA = [
    ("q01", "What does the ammonia converter yield?", "The ammonia converter yields ammonia using an iron catalyst.", "fact-based"),
    ("q02", "Which catalyst does the methanol reactor use?", "The methanol reactor uses a copper zinc catalyst.", "fact-based"),
    ("q03", "How does natural gas become ammonia?", "Natural gas feeds the primary reformer which produces syngas; the synthesis compressor pressurizes syngas and the ammonia converter yields ammonia.", "multi-hop"),
    ("q04", "Why does the hydrotreater need a cobalt molybdenum catalyst?", "The hydrotreater uses a cobalt molybdenum catalyst to remove sulfur from diesel.", "causal"),
    ("q05", "Compare the feeds of the steam reformer and the cracking furnace.", "Natural gas feeds the steam reformer while ethane and naphtha feed the cracking furnace.", "comparative"),
    ("q06", "What are the steps to produce battery grade lithium hydroxide from spodumene?", "Spodumene is calcined in the rotary kiln, roasted with sulfuric acid in the acid roaster to lithium sulfate, leached, purified, reacted with sodium hydroxide and crystallized to lithium hydroxide.", "procedural"),
    ("q07", "How is the leach tank monitored during operation?", "A ph analyzer monitors the leach tank and lime is dosed into the leach tank.", "operational"),
    ("q08", "If the converter bed lost its vanadium pentoxide what would happen to sulfur trioxide production?", "The converter bed uses vanadium pentoxide to produce sulfur trioxide, so sulfur trioxide production would fall.", "logical"),
    ("q09", "What does the membrane cell release?", "The membrane cell releases chlorine and hydrogen and produces sodium hydroxide.", "fact-based"),
    ("q10", "How does the electrolyzer connect to caustic soda?", "Electricity drives the electrolyzer which contains the membrane cell; the membrane cell produces sodium hydroxide which is sold as caustic soda.", "multi-hop"),
]


def sentence(fact) -> str:
    s, v, o = fact
    text = f"the {s} {v} {o}" if v.endswith(" the") else f"the {s} {v} the {o}"
    return text[0].upper() + text[1:] + "."


def make_corpus(rng: random.Random) -> list[dict]:
    docs = []
    for family, facts in FAMILIES.items():
        for i in range(DOCS_PER_FAMILY):
            k = rng.randint(6, min(12, len(facts)))
            picked = rng.sample(facts, k)
            if rng.random() < 0.5:
                picked.append(rng.choice(COMMON))
            body = [sentence(f) for f in picked]
            body.insert(rng.randrange(len(body) + 1), rng.choice(FILLER))
            kind = ["web", "wiki", "scholar", "patent"][i % 4]
            docs.append({
                "id": f"{family}-{i:02d}",
                "source_kind": kind,
                "title": f"{TITLES[family]} note {i + 1}",
                "text": " ".join(body),
                "metadata": {"family": family},
            })
    return docs


def png_bytes(seed: int) -> bytes:
    """A valid 1x1 grayscale PNG whose pixel depends on ``seed``."""

    def chunk(tag: bytes, data: bytes) -> bytes:
        return struct.pack(">I", len(data)) + tag + data + struct.pack(">I", zlib.crc32(tag + data) & 0xFFFFFFFF)

    ihdr = struct.pack(">IIBBBBB", 1, 1, 8, 0, 0, 0, 0)
    raw = zlib.compress(bytes([0, seed % 256]))
    return b"\x89PNG\r\n\x1a\n" + chunk(b"IHDR", ihdr) + chunk(b"IDAT", raw) + chunk(b"IEND", b"")


def make_index(root: Path, corpus: list[dict]) -> None:
    root.mkdir(parents=True, exist_ok=True)
    images = root / "images"
    images.mkdir(exist_ok=True)
    image_names = [
        "distillation_pfd", "unrelated", "ammonia_synthesis_loop_pid", "lithium_hydroxide_crystallizer_pfd",
        "sulfuric_acid_converter_bed_pfd", "membrane_cell_electrolyzer_pid", "ethylene_cracking_furnace_pfd",
        "methanol_reactor_pid",
    ]
    kinds = {"image": [], "scholar": [], "patent": [], "wiki": [], "web": []}
    for n, name in enumerate(image_names):
        (images / f"{name}.png").write_bytes(png_bytes(n))
        kinds["image"].append({
            "id": f"img-{name}", "source_kind": "image", "title": name.replace("_", " "), "text": "",
            "metadata": {"image_ref": f"images/{name}.png"},
        })
    for doc in corpus:
        kind = doc["source_kind"]
        family = doc["metadata"]["family"]
        if len([d for d in kinds[kind] if d["metadata"]["family"] == family]) < 2:
            kinds[kind].append({**doc, "id": f"{kind}-{doc['id']}"})
    manifest = {"kinds": {}}
    for kind, docs in kinds.items():
        name = f"{kind}.jsonl"
        (root / name).write_text("".join(json.dumps(d, sort_keys=True) + "\n" for d in docs), encoding="utf-8")
        manifest["kinds"][kind] = name
    lines = ["kinds:"] + [f"  {k}: {v}" for k, v in manifest["kinds"].items()]
    (root / "manifest.yaml").write_text("\n".join(lines) + "\n", encoding="utf-8")


CONFIG = """\
providers:
  kind: mock
  seed: 7
  index: index
chunk:
  window_tokens: 64
  stride_tokens: 48
  context_budget_tokens: 16
extract:
  max_triples_per_chunk: 20
dedup:
  tau_sim: 0.9
  tau_str: 0.8
  max_edit_distance: 5
community:
  seed: 42
  max_levels: 3
  resolution: 1.0
retrieve:
  top_k: 5
  max_hops: 3
  max_paths: 20
  link_threshold: 0.5
agents:
  n_max: 3
  accept_threshold: 3.0
  top_k: 3
workers: 1
"""


def main(out: Path) -> None:
    lexicon = load_lexicon()
    for facts in list(FAMILIES.values()) + [COMMON]:
        for s, _, o in facts:
            assert s in lexicon and o in lexicon, (s, o)
    rng = random.Random(20240611)
    out.mkdir(parents=True, exist_ok=True)
    corpus = make_corpus(rng)
    (out / "corpus.jsonl").write_text("".join(json.dumps(d, sort_keys=True) + "\n" for d in corpus), encoding="utf-8")
    (out / "qa.jsonl").write_text(
        "".join(json.dumps({"id": i, "question": q, "reference": r, "category": c}) + "\n" for i, q, r, c in QA),
        encoding="utf-8",
    )
    make_index(out / "index", corpus)
    (out / "config.yaml").write_text(CONFIG, encoding="utf-8")
    print(f"wrote {len(corpus)} documents, {len(QA)} QA items to {out}")


if __name__ == "__main__":
    main(Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parent.parent / "fixtures")
