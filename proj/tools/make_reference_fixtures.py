#!/usr/bin/env python3
"""Regenerates fixtures/reference: published count tables plus invented transcripts
and judgment files of the published shapes. Output is deterministic.

    make_reference_fixtures.py [OUT_DIR]   (default: fixtures/reference)"""

import csv
import json
import random
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent / "fixtures" / "reference"

LENGTHS = {"D1": 173, "D2": 147, "D3": 225, "D4": 162, "D5": 241, "D6": 194}

# annotator -> dialogue -> (B, F, U, O, reported total)
COUNTS = {
    "o3-mini": [(30, 6, 86, 55, 204), (27, 3, 41, 49, 120), (51, 3, 79, 101, 234),
                (15, 0, 158, 52, 225), (24, 6, 156, 88, 274), (34, 0, 125, 49, 208)],
    "Claude Sonnet 4": [(149, 4, 231, 144, 530), (139, 2, 179, 115, 435), (206, 8, 305, 226, 745),
                        (106, 0, 262, 76, 444), (178, 7, 303, 209, 697), (153, 4, 230, 160, 547)],
    "Gemma 8.5B": [(121, 2, 62, 1, 186), (114, 0, 49, 0, 163), (191, 0, 101, 0, 292),
                   (103, 1, 53, 0, 157), (149, 2, 96, 0, 247), (135, 0, 85, 0, 220)],
    "Human": [(127, 0, 8, 52, 188), (198, 0, 4, 20, 222), (181, 3, 13, 28, 225),
              (37, 0, 52, 52, 141), (227, 0, 88, 128, 443), (188, 0, 68, 103, 359)],
}

# Detector validation on D1: name, counts-table annotator, correct, wrong.
VALIDATION = [("Claude Sonnet 4", "Claude Sonnet 4", 383, 145), ("Gemma 8.5B", "Gemma 8.5B", 147, 39),
              ("Naive Human", "Human", 98, 89), ("o3-mini", "o3-mini", 155, 22)]

KIND_NAMES = ["Belief Contradiction", "False Belief", "Unsupported Belief", "Omission"]

DIRECTOR_LINES = [
    "go through the door on your left",
    "there should be a blue box in that room",
    "do you see a green box",
    "keep going down the hallway",
    "the blue box should be next to the table",
    "turn right at the end of the hall",
    "can you check the room on the right",
    "there is another green box past the kitchen",
    "head back toward the starting room",
    "pick up the blue box",
    "I think there are two boxes in there",
    "let me know when you reach the door",
]
SEARCHER_LINES = [
    "okay", "kay", "yes", "I see it", "there is no box here", "got it",
    "there is a green box on the shelf", "I am in the hallway now", "which door",
    "I picked up the blue box", "the room is empty", "alright",
]


def write_csv(path, rows):
    with open(path, "w", newline="") as f:
        csv.writer(f, lineterminator="\n").writerows(rows)


def transcript(name, n, rng):
    lines = []
    t = 0.0
    for i in range(n):
        speaker = "Director" if i % 2 == 0 else "Searcher"
        text = rng.choice(DIRECTOR_LINES if speaker == "Director" else SEARCHER_LINES)
        dur = round(rng.uniform(0.5, 3.0), 2)
        lines.append((speaker, text, round(t, 2), round(t + dur, 2)))
        t += dur + round(rng.uniform(0.1, 1.5), 2)
    return lines


def main(root):
    rng = random.Random(20250601)
    (root / "transcripts").mkdir(parents=True, exist_ok=True)
    (root / "judgments").mkdir(parents=True, exist_ok=True)

    write_csv(root / "lengths.csv", [["dialogue", "utterances"]] + [[d, n] for d, n in LENGTHS.items()])

    rows = [["annotator", "dialogue", "belief_contradictions", "false_beliefs", "unsupported_beliefs",
             "omissions", "reported_total"]]
    for annotator, per in COUNTS.items():
        for d, (b, f, u, o, total) in zip(LENGTHS, per):
            rows.append([annotator, d, b, f, u, o, total])
    write_csv(root / "counts.csv", rows)

    write_csv(root / "accuracy.csv",
              [["annotator", "correct", "wrong"]] + [[n, c, w] for n, _, c, w in VALIDATION])

    for d, n in LENGTHS.items():
        lines = transcript(d, n, rng)
        if d in ("D1", "D2"):
            body = "".join(f'{s}: "{t}" [{a} {b}]\n' for s, t, a, b in lines)
            (root / "transcripts" / f"{d}.txt").write_text(body)
        else:
            doc = {"id": d, "utterances": [
                {"index": i, "speaker": s, "text": t, "start": a, "end": b}
                for i, (s, t, a, b) in enumerate(lines)]}
            (root / "transcripts" / f"{d}.json").write_text(json.dumps(doc, indent=2) + "\n")

    for name, counts_name, correct, wrong in VALIDATION:
        b, f, u, o, _ = COUNTS[counts_name][0]
        kinds = [0] * b + [1] * f + [2] * u + [3] * o
        assert len(kinds) == correct + wrong
        verdicts = ["correct"] * correct + ["wrong"] * wrong
        rng.shuffle(verdicts)
        judgments = []
        for i, (k, v) in enumerate(zip(kinds, verdicts)):
            judgments.append({
                "Discrepancy Type": KIND_NAMES[k],
                "Ground Truth Belief": f"The searcher believes that item {i} is in room {i % 7}.",
                "Annotator Belief": "absent" if k == 3 else f"The searcher believes that item {i} is in room {(i + 1) % 7}.",
                "Explanation": f"synthetic judgment {i}",
                "utterance_index": i % LENGTHS["D1"],
                "verdict": v,
            })
        stem = name.replace(" ", "_")
        doc = {"annotator": name, "dialogue_id": "D1", "judgments": judgments}
        (root / "judgments" / f"{stem}.json").write_text(json.dumps(doc, indent=2) + "\n")


if __name__ == "__main__":
    main(Path(sys.argv[1]) if len(sys.argv) > 1 else ROOT)
