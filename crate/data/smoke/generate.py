"""Regenerates the smoke corpus: python3 generate.py (writes next to this file)."""

import csv
import pathlib
import random

HERE = pathlib.Path(__file__).parent
FILLER = (
    "the a this that one we they it some many film story day team city place "
    "thing people time year way week night plan room book road river house "
    "said saw made took went came found kept left moved"
).split()
BINARY = {"positive": ["great", "excellent"], "negative": ["awful", "terrible"]}
TOPICS = {"finance": ["stocks", "bank"], "sports": ["goal", "match"], "weather": ["rain", "storm"]}
DIM = 8


def sentence(rng, marker=None):
    words = rng.sample(FILLER, rng.randint(5, 7))
    if marker:
        words[rng.randrange(len(words))] = marker
    return " ".join(words).capitalize() + "."


def document(rng, markers):
    count = rng.randint(3, 4)
    tagged = rng.randrange(count)
    return " ".join(sentence(rng, rng.choice(markers) if i == tagged else None) for i in range(count))


def write(path, rows):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["text", "label"])
        w.writerows(rows)


def corpus(rng, classes, per_class):
    rows = []
    for label, markers in classes.items():
        rows += [(document(rng, markers), label) for _ in range(per_class)]
    rng.shuffle(rows)
    return rows


def main():
    rng = random.Random(20240601)
    write(HERE / "binary_train.csv", corpus(rng, BINARY, 20))
    write(HERE / "binary_test.csv", corpus(rng, BINARY, 10))
    write(HERE / "topics_train.csv", corpus(rng, TOPICS, 14))
    write(HERE / "topics_test.csv", corpus(rng, TOPICS, 7))
    # marker words of one class sit near a shared prototype, as related
    # words do in trained embeddings; filler words are low-norm noise
    vectors = {w: [rng.uniform(-0.3, 0.3) for _ in range(DIM)] for w in FILLER + ["."]}
    for markers in list(BINARY.values()) + list(TOPICS.values()):
        proto = [rng.uniform(-1, 1) for _ in range(DIM)]
        for m in markers:
            vectors[m] = [v + rng.uniform(-0.1, 0.1) for v in proto]
    with open(HERE / "embeddings.txt", "w") as f:
        for word, vec in vectors.items():
            f.write(word + " " + " ".join(f"{v:.4f}" for v in vec) + "\n")


if __name__ == "__main__":
    main()
