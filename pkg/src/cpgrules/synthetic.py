"""Deterministic synthetic guideline corpus with planted class-discriminative bigrams.

1200 sentences, three quarters of them NA background.  Class cues:

* C-A: "recommended for", "is recommended", "treatment with"
* C-C: "leads to" (in about 95% of C-C sentences; also in under 2% of NA)
* A:   "initiate the", "is needed"

Fillers (populations, diseases, drugs, outcomes) are shared by all classes so
that the cue phrases carry the signal.  Run ``python -m cpgrules.synthetic OUTDIR``
to regenerate the bundled files.
"""
from __future__ import annotations

import random
import sys
from pathlib import Path

import numpy as np

from .embeddings import EmbeddingTable, save_embeddings
from .textprep import SentenceRecord, prepare_sentence

CLASS_COUNTS = {"C-A": 196, "C-C": 59, "A": 24, "NA": 921}
EMBEDDING_DIM = 32

POPULATIONS = ["adults", "patients", "children", "older adults", "black patients", "nonblack patients",
               "adults aged 60 years or older", "adults younger than 60 years", "pregnant women"]
DISEASES = ["hypertension", "diabetes", "CKD", "asthma", "rhinosinusitis", "heart failure", "proteinuria",
            "obesity"]
DRUGS = ["a calcium channel blocker", "a thiazide-type diuretic", "an ACE inhibitor", "an ARB", "amoxicillin",
         "doxycycline", "inhaled corticosteroids", "intranasal corticosteroids", "salbutamol"]
OUTCOMES = ["death", "stroke", "kidney failure", "cardiovascular events", "complications", "hospitalization"]
ATTRIBUTES = ["SBP", "DBP", "blood pressure", "heart rate", "eGFR"]
GOALS = ["SBP goal", "DBP goal", "BP goal"]
VALUES = ["130", "140", "150", "90", "80", "150/90", "140/90"]
QUALITY = ["high", "moderate", "low", "very low"]
ORGS = ["primary care", "cardiology", "nephrology", "pharmacology", "nursing"]

TEMPLATES = {
    "C-A": [
        "{Drug} is recommended for {pop} with {disease} .",
        "In {pop} with {disease} , {drug} is recommended as initial therapy .",
        "An {goal} of lower than {num} mm Hg is commonly recommended for {pop} with {disease} .",
        "For {pop} with {disease} , treatment with {drug} is recommended .",
        "In {pop} with {disease} , treatment with {drug} should be started when {attr} is above {num} mm Hg .",
        "{Drug} or {drug2} is recommended for {pop} with {disease} and {disease2} .",
    ],
    "C-C": [
        "Uncontrolled {disease} in {pop} leads to {outcome} .",
        "Elevated {attr} leads to {outcome} in {pop} with {disease} .",
        "Untreated {disease} leads to {outcome} and {outcome2} .",
        "In {pop} , a high {attr} leads to {outcome} .",
    ],
    "C-C-rare": [
        "Elevated {attr} results in {outcome} among {pop} .",
    ],
    "A": [
        "Initiate the {drugbare} at a low dose .",
        "Initiate the treatment with {drug} and monitor {attr} .",
        "Titration of {drug} is needed to reach the {goal} .",
        "Monitoring of {attr} is needed after each dose change .",
    ],
    "NA": [
        "The panel reviewed {n} trials published since {year} .",
        "Evidence for {drug} in {pop} was graded as {quality} .",
        "Several trials in {pop} with {disease} compared {drug} and {drug2} .",
        "This section summarizes the evidence on {disease} and {outcome} .",
        "The prevalence of {disease} among {pop} is increasing .",
        "{Disease} affects many {pop} worldwide .",
        "Members of the panel were selected from {org} .",
        "The use of {drug} in {pop} was evaluated in {n} studies .",
        "Data on {attr} were collected in {n} cohorts of {pop} .",
        "The committee met {n} times between {year} and {year2} .",
        "Rates of {outcome} differed between {pop} and {pop2} .",
    ],
    "NA-rare": [
        "It is unclear whether {disease} leads to {outcome} in {pop} .",
    ],
}

# extra vocabulary for expansion demos, grouped with their semantic family
FAMILIES = {
    "recommend": ["recommend", "recommended", "recommends", "recommending", "recommendation", "advise",
                  "advised", "suggest", "suggested", "urge", "endorse", "propose", "commend"],
    "lead": ["leads", "lead", "causes", "cause", "results", "triggers", "produces"],
    "drug": ["calcium", "channel", "blocker", "thiazide-type", "diuretic", "ace", "inhibitor", "arb",
             "amoxicillin", "doxycycline", "inhaled", "intranasal", "corticosteroids", "salbutamol"],
    "disease": ["hypertension", "diabetes", "ckd", "asthma", "rhinosinusitis", "heart", "failure",
                "proteinuria", "obesity"],
    "outcome": ["death", "stroke", "kidney", "cardiovascular", "events", "complications", "hospitalization"],
    "population": ["adults", "patients", "children", "older", "black", "nonblack", "pregnant", "women",
                   "younger"],
}


def _fill(template: str, rng: random.Random) -> str:
    drug, drug2 = rng.sample(DRUGS, 2)
    disease, disease2 = rng.sample(DISEASES, 2)
    outcome, outcome2 = rng.sample(OUTCOMES, 2)
    pop, pop2 = rng.sample(POPULATIONS, 2)
    year = rng.randint(1990, 2012)
    values = dict(
        drug=drug, drug2=drug2, Drug=drug[0].upper() + drug[1:], drugbare=drug.split(" ", 1)[-1],
        disease=disease, disease2=disease2, Disease=disease[0].upper() + disease[1:],
        outcome=outcome, outcome2=outcome2, pop=pop, pop2=pop2, attr=rng.choice(ATTRIBUTES),
        goal=rng.choice(GOALS), num=rng.choice(VALUES), n=rng.randint(2, 60), year=year,
        year2=year + rng.randint(1, 8), quality=rng.choice(QUALITY), org=rng.choice(ORGS),
    )
    return template.format(**values)


def generate_corpus(seed: int = 7, counts=CLASS_COUNTS) -> list[SentenceRecord]:
    rng = random.Random(seed)
    labeled = []
    for label, n in counts.items():
        for _ in range(n):
            pool = TEMPLATES[label]
            if label == "C-C" and rng.random() < 0.05:
                pool = TEMPLATES["C-C-rare"]
            elif label == "NA" and rng.random() < 0.015:
                pool = TEMPLATES["NA-rare"]
            labeled.append((label, _fill(rng.choice(pool), rng)))
    rng.shuffle(labeled)
    docs = ("synthetic-hypertension", "synthetic-rhinosinusitis", "synthetic-asthma")
    out = []
    per_doc = {d: 0 for d in docs}
    for i, (label, text) in enumerate(labeled):
        doc = docs[i % 3]
        out.append(prepare_sentence(text, doc_id=doc, sent_index=per_doc[doc], label=label))
        per_doc[doc] += 1
    return out


def generate_embeddings(sentences, seed: int = 11, dim: int = EMBEDDING_DIM) -> EmbeddingTable:
    """Random vectors with one shared centre per word family (within-family cosine about 0.7)."""
    rng = np.random.default_rng(seed)
    vocab = sorted({t.normalized for s in sentences for t in s.tokens if not t.is_punct}
                   | {w for ws in FAMILIES.values() for w in ws})
    centres = {f: rng.normal(size=dim) / np.sqrt(dim) for f in FAMILIES}
    family_of = {w: f for f, ws in FAMILIES.items() for w in ws}
    rows = []
    for w in vocab:
        noise = rng.normal(size=dim) / np.sqrt(dim)
        f = family_of.get(w)
        rows.append(np.round(centres[f] + 0.6 * noise if f else noise, 6))
    return EmbeddingTable(vocab, rows)


def main(argv=None) -> int:
    from .files import write_corpus

    args = sys.argv[1:] if argv is None else argv
    out = Path(args[0] if args else ".")
    out.mkdir(parents=True, exist_ok=True)
    corpus = generate_corpus()
    write_corpus(out / "synthetic_corpus.jsonl", corpus)
    save_embeddings(generate_embeddings(corpus), out / "synthetic_vectors.txt")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
