"""Seeded generators for the bundled demo corpus and for property tests.

``write_corpus`` produces a small multi-organization corpus with a query
file whose gold citations include multi-section comparisons and evidence
spans that run across procedure step boundaries. ``random_markdown`` and
``procedure_markdown`` produce arbitrary documents for invariant checks.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

# --------------------------------------------------------------------------
# Demo corpus
# --------------------------------------------------------------------------

ORGS = {
    "northwind-rail": {
        "name": "Northwind Rail",
        "docs": {
            "baggage-policy": ("Baggage Policy", ["Cabin Luggage", "Bicycles", "Pushchairs", "Musical Instruments", "Pet Carriers", "Ski Equipment"],
                               "Register a Bicycle Reservation"),
            "refunds": ("Tickets and Refunds", ["Advance Fares", "Anytime Fares", "Season Tickets", "Railcards", "Group Tickets", "Flexi Passes"],
                        "Claim a Delay Refund"),
            "accessibility": ("Accessible Travel", ["Ramp Assistance", "Wheelchair Spaces", "Assistance Dogs", "Mobility Scooters", "Hearing Loops", "Quiet Coaches"],
                              "Book Passenger Assistance"),
            "lost-property": ("Lost Property", ["Station Offices", "Onboard Finds", "Valuables", "Umbrellas", "Electronics", "Identity Documents"],
                              "Report a Lost Item"),
        },
    },
    "halcyon-bank": {
        "name": "Halcyon Bank",
        "docs": {
            "current-accounts": ("Current Accounts", ["Everyday Account", "Premier Account", "Student Account", "Joint Account", "Basic Account", "Graduate Account"],
                                 "Open a Current Account"),
            "card-services": ("Card Services", ["Debit Cards", "Credit Cards", "Contactless Limits", "Virtual Cards", "Travel Money Cards", "Business Cards"],
                              "Replace a Lost Card"),
            "mortgages": ("Mortgages", ["Fixed Rate Deals", "Tracker Deals", "Offset Mortgages", "Remortgaging", "Buy to Let", "Shared Ownership"],
                          "Apply for a Mortgage in Principle"),
            "fraud-protection": ("Fraud Protection", ["Phishing Emails", "Scam Calls", "Card Skimming", "Account Takeover", "Romance Scams", "Investment Scams"],
                                 "Report Suspected Fraud"),
        },
    },
    "corvel-motors": {
        "name": "Corvel Motors",
        "docs": {
            "servicing": ("Vehicle Servicing", ["Interim Service", "Full Service", "Major Service", "Brake Inspection", "Air Conditioning", "Battery Health"],
                          "Book a Service Appointment"),
            "warranty": ("Warranty Cover", ["Powertrain Cover", "Paintwork Cover", "Corrosion Cover", "Hybrid Battery Cover", "Roadside Cover", "Extended Cover"],
                         "Make a Warranty Claim"),
            "charging": ("Home Charging", ["Wallbox Chargers", "Tethered Cables", "Off Peak Tariffs", "Solar Integration", "Smart Scheduling", "Charger Grants"],
                         "Install a Home Charger"),
            "tyres": ("Tyre Care", ["Tread Depth", "Tyre Pressure", "Winter Tyres", "Run Flat Tyres", "Puncture Repair", "Wheel Alignment"],
                      "Change a Flat Tyre"),
        },
    },
}

# doc ids rendered as HTML instead of Markdown
HTML_DOCS = {"northwind-rail/lost-property", "halcyon-bank/card-services", "corvel-motors/tyres"}

ATTRIBUTES = ["fee", "limit", "deadline", "eligibility", "coverage", "exception"]

# sentence templates per attribute; every one yields a distinctive fact
FACT_TEMPLATES = {
    "fee": "The {sub} fee is {amount} per {period}, charged when the {thing} is confirmed.",
    "limit": "{Sub} are limited to {count} {unit} for each {party}, with a hard cap of {cap} {unit}.",
    "deadline": "Requests about {sub} must arrive at least {days} days before the {event} to be accepted.",
    "eligibility": "{Sub} are available to {party}s who have held a {thing} for {months} months or longer.",
    "coverage": "{Sub} cover {item_a} and {item_b} but not {item_c}.",
    "exception": "An exception for {sub} applies during {season}, when the {thing} is waived for {party}s.",
}

QUERY_TEMPLATES = {
    "fee": ("Descriptive", "What is the fee for {sub}?"),
    "limit": ("Descriptive", "What is the limit for {sub} for each {party}?"),
    "deadline": ("Temporal", "How many days before the {event} must requests about {sub} arrive?"),
    "eligibility": ("Boolean", "Are {sub} available to a {party} who has held a {thing} for {months} months?"),
    "coverage": ("Analytical", "What do {sub} cover and what is excluded?"),
    "exception": ("Temporal", "When does the exception for {sub} apply?"),
}

FILLERS = {
    "period": ["journey", "month", "year", "booking", "visit"],
    "thing": ["reservation", "account", "booking", "membership", "policy", "contract"],
    "unit": ["items", "bags", "transactions", "claims", "visits"],
    "party": ["customer", "member", "traveller", "holder", "applicant"],
    "event": ["departure", "renewal", "appointment", "statement date", "collection"],
    "season": ["the winter timetable", "public holidays", "the summer peak", "engineering works", "the festive period"],
    "item": ["parts", "labour", "towing", "storage", "replacement", "inspection", "delivery", "cleaning",
             "calibration", "insurance", "postage", "collection"],
}

INTRO = ("This page explains how {org} handles {topic_lower}. It summarises the rules that apply to "
         "customers and points to the steps needed to get help.")

CONTEXT = [
    "These rules are reviewed every year and published in advance.",
    "Staff can explain any of these conditions in more detail.",
    "Local variations are listed on the relevant service page.",
    "The terms above form part of the standard conditions of service.",
]

STEP_VERBS = ["Gather", "Check", "Confirm", "Submit", "Review", "Collect", "Record", "Upload", "Arrange", "Verify"]
STEP_OBJECTS = ["reference number", "proof of purchase", "identity documents", "booking details", "photographs",
                "receipts", "contact details", "serial number", "signed form", "appointment slot"]

BANNERS = [
    "We use cookies to improve your experience. Accept all cookies or manage preferences.",
    "Skip to content",
    "Sign in to your account to see personalised offers.",
]


@dataclass
class _Fact:
    sub: str
    attribute: str
    sentence: str
    slots: dict


@dataclass
class _Doc:
    doc_id: str
    org_key: str
    title: str
    markdown: str
    facts: list[_Fact] = field(default_factory=list)
    procedure_title: str = ""
    steps: list[tuple[str, list[str]]] = field(default_factory=list)


def _fill(rng: random.Random, sub: str, attribute: str) -> _Fact:
    items = rng.sample(FILLERS["item"], 3)
    slots = {
        "sub": sub.lower(),
        "Sub": sub,
        "amount": f"£{rng.randint(2, 95)}.{rng.choice(['00', '50', '25', '75'])}",
        "period": rng.choice(FILLERS["period"]),
        "thing": rng.choice(FILLERS["thing"]),
        "count": rng.randint(2, 9),
        "cap": rng.randint(10, 30),
        "unit": rng.choice(FILLERS["unit"]),
        "party": rng.choice(FILLERS["party"]),
        "days": rng.randint(3, 45),
        "event": rng.choice(FILLERS["event"]),
        "months": rng.randint(3, 24),
        "item_a": items[0],
        "item_b": items[1],
        "item_c": items[2],
        "season": rng.choice(FILLERS["season"]),
    }
    return _Fact(sub, attribute, FACT_TEMPLATES[attribute].format(**slots), slots)


def _build_doc(rng: random.Random, org_key: str, slug: str, layout: tuple) -> _Doc:
    title, subs, procedure = layout
    org_name = ORGS[org_key]["name"]
    doc = _Doc(doc_id=f"{org_key}/{slug}", org_key=org_key, title=title, markdown="")
    lines = [f"# {title}", "", rng.choice(BANNERS[1:]), "", INTRO.format(org=org_name, topic_lower=title.lower()), ""]
    groups = [subs[:3], subs[3:]]
    section_names = ["Rules and Charges", "Special Cases"]
    for name, members in zip(section_names, groups):
        lines += [f"## {name}", ""]
        for sub in members:
            lines += [f"### {sub}", ""]
            attrs = rng.sample(ATTRIBUTES, 3)
            facts = [_fill(rng, sub, a) for a in attrs]
            doc.facts.extend(facts)
            lines += [" ".join(f.sentence for f in facts[:2]), "", facts[2].sentence + " " + rng.choice(CONTEXT), ""]
    # procedure: numbered step headings under a "Steps to ..." heading
    doc.procedure_title = procedure
    lines += [f"## How to {procedure}", "", f"Follow these steps to {procedure[0].lower() + procedure[1:]}.", ""]
    n_steps = rng.randint(4, 6)
    verbs = rng.sample(STEP_VERBS, n_steps)
    objects = rng.sample(STEP_OBJECTS, n_steps)
    for i in range(n_steps):
        head = f"{i + 1}. {verbs[i]} the {objects[i]}"
        body = [
            f"{verbs[i]} the {objects[i]} before moving on to the next stage.",
            f"Keep the {objects[i]} to hand because the {rng.choice(FILLERS['party'])} desk may ask for it again.",
        ]
        doc.steps.append((head, body))
        lines += [f"### {head}", "", " ".join(body), ""]
    lines += ["## Contact and Support", "",
              f"- Phone the {org_name} help line for questions about {title.lower()}.",
              f"- Visit any {org_name} branch or station desk during opening hours.",
              f"- Write to the {org_name} customer relations team.", "",
              BANNERS[0], ""]
    doc.markdown = "\n".join(lines)
    return doc


def _markdown_to_html(doc: _Doc) -> str:
    """Render the generated Markdown as a plain HTML page (with a script to drop)."""
    out = ["<!DOCTYPE html>", "<html><head><title>" + doc.title + "</title>",
           "<style>body { font-family: sans-serif; }</style></head><body>",
           "<script>window.analytics = {track: function () {}};</script>"]
    for block in doc.markdown.split("\n\n"):
        block = block.strip()
        if not block:
            continue
        if block.startswith("#"):
            level = len(block) - len(block.lstrip("#"))
            out.append(f"<h{level}>{block[level:].strip()}</h{level}>")
        elif block.startswith("- "):
            out.append("<ul>" + "".join(f"<li>{line[2:]}</li>" for line in block.splitlines()) + "</ul>")
        else:
            out.append(f"<p>{block}</p>")
    out.append("</body></html>")
    return "\n".join(out) + "\n"


def _queries(rng: random.Random, docs: list[_Doc]) -> list[dict]:
    queries = []

    def add(category: str, org: str, text: str, gold: list[tuple[str, str]]):
        queries.append({
            "query_id": f"q{len(queries) + 1:03d}",
            "text": text,
            "category": category,
            "org": org,
            "gold": [{"doc_id": d, "evidence": e} for d, e in gold],
        })

    for doc in docs:
        org = ORGS[doc.org_key]["name"]
        facts = doc.facts
        # single-fact questions
        for fact in rng.sample(facts, 4):
            category, template = QUERY_TEMPLATES[fact.attribute]
            add(category, org, template.format(**fact.slots), [(doc.doc_id, fact.sentence)])
        # comparisons between two sibling subsections on the same attribute
        by_attr: dict[str, list[_Fact]] = {}
        for f in facts:
            by_attr.setdefault(f.attribute, []).append(f)
        pairs = [fs for fs in by_attr.values() if len(fs) >= 2]
        if pairs:
            a, b = rng.sample(rng.choice(pairs), 2)
            add("Comparative", org, f"How does the {a.attribute} for {a.sub.lower()} compare with {b.sub.lower()}?",
                [(doc.doc_id, a.sentence), (doc.doc_id, b.sentence)])
        # open-ended synthesis across three subsections
        picks = rng.sample(facts, 3)
        subs = ", ".join(p.sub.lower() for p in picks)
        add("Open-Ended", org, f"Summarise the {doc.title.lower()} rules for {subs}.",
            [(doc.doc_id, p.sentence) for p in picks])
        # procedural: evidence spans the end of one step and the start of the next
        i = rng.randrange(len(doc.steps) - 1)
        (head_a, body_a), (head_b, body_b) = doc.steps[i], doc.steps[i + 1]
        evidence = f"{body_a[-1]} {head_b} {body_b[0]}"
        step_words = head_b.split(" ", 1)[1].lower()
        add("Procedural", org, f"{doc.procedure_title}: what comes after step {i + 1}, and how do I {step_words}?",
            [(doc.doc_id, evidence)])
    return queries


def generate_corpus(seed: int = 7) -> tuple[dict[str, str], list[dict]]:
    """Return ``{relative_path: content}`` and the query records."""
    rng = random.Random(seed)
    docs = [
        _build_doc(rng, org_key, slug, layout)
        for org_key, org in ORGS.items()
        for slug, layout in org["docs"].items()
    ]
    files = {}
    for doc in docs:
        if doc.doc_id in HTML_DOCS:
            files[f"docs/{doc.doc_id}.html"] = _markdown_to_html(doc)
        else:
            files[f"docs/{doc.doc_id}.md"] = doc.markdown
    return files, _queries(rng, docs)


def write_corpus(root: Union[str, Path], seed: int = 7) -> Path:
    root = Path(root)
    files, queries = generate_corpus(seed)
    for rel, content in files.items():
        path = root / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(content, encoding="utf-8")
    (root / "queries.jsonl").write_text(
        "".join(json.dumps(q, ensure_ascii=False) + "\n" for q in queries), encoding="utf-8"
    )
    return root


def bundled_corpus() -> Path:
    return Path(__file__).parent / "data" / "synthetic_corpus"


# --------------------------------------------------------------------------
# Random documents for property tests
# --------------------------------------------------------------------------

_WORDS = ("alpha bravo charlie delta echo foxtrot golf hotel india juliet kilo lima mike november "
          "oscar papa quebec romeo sierra tango uniform victor whiskey xray yankee zulu fare route "
          "ticket claim refund policy station card account limit charge review").split()


def _sentence(rng: random.Random, lo: int = 4, hi: int = 14) -> str:
    words = [rng.choice(_WORDS) for _ in range(rng.randint(lo, hi))]
    return words[0].capitalize() + " " + " ".join(words[1:]) + "."


def _paragraph(rng: random.Random) -> str:
    return " ".join(_sentence(rng) for _ in range(rng.randint(1, 4)))


def random_markdown(rng: random.Random, n_blocks: Optional[int] = None) -> str:
    """An arbitrary but well-formed Markdown document."""
    blocks: list[str] = []
    if rng.random() < 0.3:
        blocks.append(_paragraph(rng))  # orphan before any heading
    level = 1
    for _ in range(n_blocks or rng.randint(3, 25)):
        r = rng.random()
        if r < 0.28:
            level = max(1, min(4, level + rng.choice([-1, 0, 1, 1])))
            text = _sentence(rng, 1, 5).rstrip(".")
            if rng.random() < 0.25:
                text = f"{rng.randint(1, 9)}. {text}"
            blocks.append("#" * level + " " + text)
        elif r < 0.62:
            blocks.append(_paragraph(rng))
        elif r < 0.72:
            blocks.append("\n".join(f"- {_sentence(rng, 2, 6)}" for _ in range(rng.randint(1, 4))))
        elif r < 0.80:
            blocks.append("\n".join(f"{i}. {_sentence(rng, 2, 6)}" for i in range(1, rng.randint(2, 5))))
        elif r < 0.87:
            rows = [f"| {rng.choice(_WORDS)} | {rng.randint(1, 99)} |" for _ in range(rng.randint(1, 3))]
            blocks.append("\n".join(["| key | value |", "| --- | --- |", *rows]))
        elif r < 0.92:
            blocks.append("```\n" + f"{rng.choice(_WORDS)} = {rng.randint(0, 9)}" + "\n```")
        elif r < 0.96:
            blocks.append(rng.choice(BANNERS))
        else:
            blocks.append(_paragraph(rng) + "\n" + _sentence(rng))
    return "\n\n".join(blocks) + "\n"


def procedure_markdown(rng: random.Random) -> str:
    """A document with at least one procedure of numbered step headings."""
    parts = [f"# {_sentence(rng, 2, 4).rstrip('.')}", _paragraph(rng)]
    for _ in range(rng.randint(1, 3)):
        if rng.random() < 0.5:
            parts += [f"## {_sentence(rng, 2, 4).rstrip('.')}", _paragraph(rng)]
        parts.append(f"## Steps to {_sentence(rng, 2, 3).rstrip('.').lower()}")
        for i in range(1, rng.randint(3, 7)):
            parts.append(f"### {i}. {_sentence(rng, 2, 4).rstrip('.')}")
            for _ in range(rng.randint(1, 2)):
                parts.append(_paragraph(rng))
    return "\n\n".join(parts) + "\n"
