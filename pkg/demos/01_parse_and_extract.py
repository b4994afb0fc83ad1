"""Parse the bundled sample transcripts and show what the keyword rule keeps.

Run: python demos/01_parse_and_extract.py
"""

import json
from importlib.resources import files

from newsbias.entities import extract_keywords, recognize_entities
from newsbias.ingest import ingest_paths

corpus = files("newsbias") / "data" / "sample_corpus"
aliases = json.loads((files("newsbias") / "data" / "sample_aliases.json").read_text())

result = ingest_paths([str(corpus)])
print(f"{len(result.transcripts)} transcripts admitted, {len(result.rejected)} rejected\n")

first = result.transcripts[0]
print(f"{first.program_id} on {first.header.air_date}")
for st in first.statements[:3]:
    print(f"  {st.speaker}: {len(st.sentence_spans)} sentence(s)")
    for s in st.sentences:
        print(f"    | {s}")

# Every candidate mention, including the ones the exclusion patterns catch.
mentions = recognize_entities(first, aliases=aliases)
print("\nmentions:", sorted({(m.canonical, m.label) for m in mentions}))

# Keywords: top five by count, then at least three distinct sentences each.
print()
for t in result.transcripts:
    ka = extract_keywords(t, aliases=aliases)
    picked = ", ".join(f"{k.text} x{k.count}" for k in ka.keywords) or "(none)"
    print(f"{t.program_id:32s} {picked}")
