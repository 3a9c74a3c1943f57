"""Regenerates the synthetic corpus, fixture gazetteer and keyword list.

Markup in TEXTS: {Surface|layers} marks a toponym span found by the listed
layers (f = flair, s = spacy, t = stanza). A variant after ";" gives a
shorter prefix found by other layers, e.g. {Porto Alegre|fs;Porto|t}.
"""

import json
import re
from pathlib import Path

HERE = Path(__file__).parent
LAYERS = {"f": "flair", "s": "spacy", "t": "stanza"}

# (id, gold, year, explicit sentences?, text)
TEXTS = [
    ("d01", ["bra"], 2024, True,
     "Hochwasser in {Porto Alegre|fs;Porto|t}: Die Lage im Süden {Brasiliens|fs} bleibt angespannt. "
     "Bundeskanzler in {Berlin|fst} sagt Hilfe zu. Auch in {Rio Grande do Sul|f;Rio Grande|t} steigen die Pegel."),
    ("d02", ["deu"], 2023, True,
     "Die Hitzewelle erreicht {Deutschland|fst}. In {Berlin|fst} und {München|fst} wurden 38 Grad gemessen. "
     "Meteorologen in {Offenbach|fs} warnen vor Dürre."),
    ("d03", ["deu"], 2022, True,
     "Nach dem Sturm sind in {Neustadt|fst} viele Bäume umgestürzt. Auch {Mannheim|fst} und {Heidelberg|fs} melden Schäden."),
    ("d04", ["usa"], 2021, True,
     "Waldbrände wüten in {Kalifornien|fst}. Die Feuerwehr in {Paris|fst} im Bundesstaat {Texas|fs} schickt Hilfe. "
     "Bei {Los Angeles|fst} wurden Tausende evakuiert."),
    ("d05", ["esp"], 2024, True,
     "Schwere Unwetter in {Valencia|fst}: Die Überschwemmungen zerstörten Straßen. Bilder aus {Spanien|fst} zeigen das Ausmaß. "
     "In {Madrid|fs} tagt der Krisenstab."),
    ("d06", ["ita", "fra"], 2022, True,
     "Die Dürre trifft {Italien|fst} und {Frankreich|fst} gleichermaßen. In der {Po-Ebene|fs} vertrocknen Felder. "
     "Bauern in {Lyon|ft} und {Mailand|fst} fordern Hilfe."),
    ("d07", ["pak"], 2022, True,
     "Nach dem Monsun: Hochwasser in {Pakistan|fst}. Besonders betroffen ist die Provinz {Sindh|fst}. "
     "Die Regierung in {Islamabad|fs} bittet um Hilfe. Helfer aus {Deutschland|ft} sind unterwegs."),
    ("d08", ["aus"], 2020, True,
     "Buschfeuer in {Australien|fst}: Rund um {Sydney|fst} brennen Wälder. In {Victoria|fs} gilt der Notstand."),
    ("d09", ["fji"], 2016, True,
     "Ein Wirbelsturm traf {Fidschi|fst}. In {Suva|fst} und auf {Lau|ft} wurden Häuser zerstört. Auch {Taveuni|fs} meldet Schäden."),
    ("d10", ["che"], 2023, True,
     "Erdrutsch in den {Alpen|s}: Im Kanton {Graubünden|fst} wurde das Dorf {Brienz|fst} evakuiert. "
     "Experten aus {Zürich|fs} beobachten den Hang."),
    ("d11", ["can"], 2019, True,
     "Eine Kältewelle hat {Kanada|fst} fest im Griff. In {Winnipeg|fst} fielen die Temperaturen auf minus 45 Grad. "
     "Auch {Toronto|fs} meldet Rekordkälte."),
    ("d12", ["ind"], 2024, True,
     "Die Hitzewelle in {Indien|fst} fordert Todesopfer. In {Neu-Delhi|fs} wurden 48 Grad gemessen. "
     "Auch {Pakistan|ft} leidet unter der Hitze."),
    ("d13", [], 2021, True,
     "Kommentar: Das Klima verändert sich, auch in {Europa|fst}."),
    ("d14", ["deu"], 2023, False,
     "Ein Sturm zog über das Land. Es gab viele Schäden."),
    ("d15", ["aut"], 2022, True,
     "Die Regierung in {Wien|fst} beschloss ein neues Programm für {Österreich|fst}."),
    ("d16", ["bra"], 2023, True,
     "Dürre am Amazonas: In {Manaus|fst} sinkt der Pegel des {Rio Negro|fs}. {Brasilien|fst} ruft den Notstand aus."),
    ("d17", ["deu"], 2021, True,
     "Hochwasser an der {Ahr|fst}: In {Bad Neuenahr|fs} stehen Häuser unter Wasser. "
     "Das Land {Rheinland-Pfalz|fst} bittet den Bund um Hilfe. Die {Sonne|s} kam erst Tage später zurück."),
    ("d18", ["grc"], 2023, True,
     "Waldbrand auf {Rhodos|fst}: Touristen wurden aus Hotels evakuiert. Die Regierung in {Athen|fst} schickt Löschflugzeuge. "
     "Auch aus {Deutschland|fs} kamen Helfer."),
    ("d19", ["usa"], 2022, True,
     "Ein Hurrikan trifft {Florida|fst}. In {Miami|fst} fällt der Strom aus. Auch {Havanna|fs} auf {Kuba|ft} meldet Sturmschäden."),
    ("d20", ["ita"], 2023, True,
     "Unwetter in Norditalien: Überschwemmungen in der {Emilia-Romagna|fst}. In {Bologna|fst} und {Ravenna|fs} stehen Straßen unter Wasser. "
     "{Rom|ft} verspricht Hilfe."),
    ("d21", ["esp"], 2022, True,
     "Hitzewelle in {Spanien|fst}: In {Sevilla|fst} wurden 46 Grad gemessen. Auch {Portugal|fs} ist betroffen. "
     "Einwohner von {Santiago|fs} leiden."),
    ("d22", ["pak"], 2022, False,
     "Erdrutsch in {Pakistan|ft} nach starkem Regen. In {Swat|fst} wurde eine Straße verschüttet."),
]

# query -> [(lat, lon, country or None, class)] in source rank order
GAZETTEER = {
    "Porto Alegre": [(-30.03, -51.23, "bra", "city")],
    "Porto": [(41.15, -8.61, "prt", "city"), (-30.0, -51.2, None, "locality")],
    "Brasiliens": [],
    "Brasilien": [(-10.33, -53.2, "bra", "country")],
    "Berlin": [(52.52, 13.405, "deu", "city"), (52.5, 13.4, "deu", "state"), (39.79, -74.93, "usa", "town"),
               (44.47, -71.18, "usa", "city")],
    "Rio Grande do Sul": [(-29.75, -53.06, "bra", "state")],
    "Rio Grande": [(25.96, -97.15, "usa", "river"), (-32.03, -52.1, "bra", "city"), (25.9, -97.2, "mex", "river")],
    "Deutschland": [(51.16, 10.45, "deu", "country")],
    "München": [(48.14, 11.58, "deu", "city")],
    "Offenbach": [(50.1, 8.77, "deu", "city"), (49.2, 8.1, "deu", "village")],
    "Neustadt": [(54.1, 10.81, "deu", "town"), (49.35, 8.14, "deu", "town"), (44.08, -80.89, "can", "village"),
                 (50.73, 16.0, None, "hamlet")],
    "Mannheim": [(49.49, 8.47, "deu", "city")],
    "Heidelberg": [(49.4, 8.69, "deu", "city"), (-26.5, 28.36, "zaf", "town")],
    "Kalifornien": [(36.78, -119.42, "usa", "state")],
    "Paris": [(48.86, 2.35, "fra", "city"), (33.66, -95.56, "usa", "city"), (38.21, -84.25, "usa", "city")],
    "Texas": [(31.0, -100.0, "usa", "state")],
    "Los Angeles": [(34.05, -118.24, "usa", "city"), (-37.47, -72.35, "chl", "city")],
    "Valencia": [(39.47, -0.38, "esp", "city"), (10.16, -68.0, "ven", "city")],
    "Spanien": [(40.46, -3.75, "esp", "country")],
    "Madrid": [(40.42, -3.7, "esp", "city"), (41.88, -93.82, "usa", "city")],
    "Italien": [(41.87, 12.57, "ita", "country")],
    "Frankreich": [(46.23, 2.21, "fra", "country")],
    "Po-Ebene": [(45.0, 10.0, None, "plain")],
    "Lyon": [(45.76, 4.84, "fra", "city")],
    "Mailand": [(45.46, 9.19, "ita", "city")],
    "Pakistan": [(30.38, 69.35, "pak", "country")],
    "Sindh": [(25.89, 68.52, "pak", "state")],
    "Islamabad": [(33.68, 73.05, "pak", "city")],
    "Australien": [(-25.27, 133.78, "aus", "country")],
    "Sydney": [(-33.87, 151.21, "aus", "city"), (46.14, -60.19, "can", "city")],
    "Victoria": [(48.43, -123.37, "can", "city"), (-37.0, 144.0, "aus", "state"), (-4.62, 55.45, "syc", "city")],
    "Fidschi": [(-17.71, 178.07, "fji", "country")],
    "Suva": [(-18.14, 178.44, "fji", "city")],
    "Lau": [(9.21, 11.28, "nga", "town"), (-17.5, -179.0, "fji", "islands")],
    "Taveuni": [(-16.85, -179.97, "fji", "island")],
    "Alpen": [(46.5, 10.0, None, "mountain_range")],
    "Graubünden": [(46.66, 9.63, "che", "state")],
    "Brienz": [(46.75, 8.04, "che", "village"), (46.67, 9.6, "che", "village")],
    "Zürich": [(47.38, 8.54, "che", "city")],
    "Kanada": [(56.13, -106.35, "can", "country")],
    "Winnipeg": [(49.9, -97.14, "can", "city")],
    "Toronto": [(43.65, -79.38, "can", "city"), (40.46, -80.6, "usa", "city")],
    "Indien": [(20.59, 78.96, "ind", "country")],
    "Neu-Delhi": [(28.61, 77.21, "ind", "city")],
    "Europa": [(54.53, 15.26, None, "continent")],
    "Wien": [(48.21, 16.37, "aut", "city")],
    "Österreich": [(47.52, 14.55, "aut", "country")],
    "Manaus": [(-3.12, -60.02, "bra", "city")],
    "Rio Negro": [(-3.1, -60.1, "bra", "river"), (-40.0, -67.0, "arg", "state")],
    "Ahr": [(50.54, 7.15, "deu", "river")],
    "Bad Neuenahr": [(50.55, 7.12, "deu", "town")],
    "Rheinland-Pfalz": [(50.12, 7.31, "deu", "state")],
    "Rhodos": [(36.43, 28.22, "grc", "island")],
    "Athen": [(37.98, 23.73, "grc", "city"), (33.96, -83.38, "usa", "city")],
    "Florida": [(27.66, -81.52, "usa", "state"), (21.52, -78.23, "cub", "town"), (-34.1, -56.2, "ury", "city")],
    "Miami": [(25.76, -80.19, "usa", "city")],
    "Havanna": [(23.11, -82.37, "cub", "city")],
    "Kuba": [(21.52, -77.78, "cub", "country"), (41.36, 48.51, "aze", "city")],
    "Emilia-Romagna": [(44.6, 11.05, "ita", "state")],
    "Bologna": [(44.49, 11.34, "ita", "city")],
    "Ravenna": [(44.42, 12.2, "ita", "city"), (41.16, -81.24, "usa", "city")],
    "Rom": [(41.9, 12.5, "ita", "city"), (34.26, -85.16, "usa", "city")],
    "Sevilla": [(37.39, -5.98, "esp", "city"), (4.27, -75.93, "col", "town")],
    "Portugal": [(39.4, -8.22, "prt", "country")],
    "Santiago": [(-33.45, -70.67, "chl", "city"), (42.88, -8.54, "esp", "city"), (19.45, -70.7, "dom", "city")],
    "Swat": [(35.22, 72.43, "pak", "district")],
    "Sonne": [],
}

KEYWORDS = """# German hazard keywords, matched as word prefixes
[heat-wave]
Hitzewelle
Hitze

[wildfire]
Waldbrand
Waldbrände
Buschfeuer

[flood]
Hochwasser
Überschwemmung
Flut

[storm]
Sturm
Wirbelsturm
Hurrikan
Orkan
Unwetter

[drought]
Dürre
Trockenheit

[cold-wave]
Kältewelle
Kälte

[landslide]
Erdrutsch
Hangrutsch
"""

MARK = re.compile(r"\{([^}|]+)\|([a-z]*)(?:;([^}|]+)\|([a-z]+))?\}")


def parse(marked):
    text, spans, pos, last = [], {l: [] for l in LAYERS.values()}, 0, 0
    for m in MARK.finditer(marked):
        text.append(marked[last:m.start()])
        pos += len(marked[last:m.start()])
        full, layers, variant, vlayers = m.groups()
        for code in layers:
            spans[LAYERS[code]].append({"start": pos, "end": pos + len(full), "surface": full})
        if variant:
            assert full.startswith(variant)
            for code in vlayers:
                spans[LAYERS[code]].append({"start": pos, "end": pos + len(variant), "surface": variant})
        text.append(full)
        pos += len(full)
        last = m.end()
    text.append(marked[last:])
    text = "".join(text)
    for layer in spans.values():
        layer.sort(key=lambda s: (s["start"], s["end"]))
        for s in layer:
            assert text[s["start"]:s["end"]] == s["surface"]
    return text, spans


def sentences(text):
    out, start = [], 0
    for m in re.finditer(r"[.!?](?=\s+[A-ZÄÖÜ])", text):
        out.append([start, m.end()])
        start = m.end()
        while start < len(text) and text[start].isspace():
            start += 1
    out.append([start, len(text.rstrip())])
    return out


def main():
    with open(HERE / "corpus.jsonl", "w", encoding="utf-8") as f:
        for doc_id, gold, year, explicit, marked in TEXTS:
            text, spans = parse(marked)
            rec = {
                "id": doc_id,
                "text": text,
                "language": "de",
                "sentences": sentences(text) if explicit else [],
                "gold_countries": gold,
                "year": year,
                "layers": spans,
            }
            f.write(json.dumps(rec, ensure_ascii=False) + "\n")
    with open(HERE / "fixture_gazetteer.jsonl", "w", encoding="utf-8") as f:
        for query in sorted(GAZETTEER):
            matches = [
                {"lat": lat, "lon": lon, "country": c, "rank": i + 1, "class": cls}
                for i, (lat, lon, c, cls) in enumerate(GAZETTEER[query])
            ]
            f.write(json.dumps({"query": query, "matches": matches}, ensure_ascii=False) + "\n")
    (HERE / "keywords.txt").write_text(KEYWORDS, encoding="utf-8")


if __name__ == "__main__":
    main()
