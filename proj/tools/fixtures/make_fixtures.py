#!/usr/bin/env python3
"""Writes the reconstructed ARC and diagnosis source fixtures under data/.

The items are written for this repository; they match the shape and size of
the study pools (39 two-option ARC items, 55 diagnosis cases over eleven
conditions) but are not the original items. Output is deterministic.
"""
import json
import random
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[2] / "data"

# (question, choices A-D, answer key, most plausible distractor)
ARC = [
    ("Which process moves water from the leaves of a plant into the air?",
     ["condensation", "transpiration", "precipitation", "germination"], "B", "A"),
    ("A student pushes a box across a rough floor. Which force acts against the motion of the box?",
     ["gravity", "magnetism", "friction", "buoyancy"], "C", "A"),
    ("Which property of a mineral is tested by scratching it across a porcelain plate?",
     ["streak", "luster", "hardness", "cleavage"], "A", "C"),
    ("Which layer of Earth is made mostly of liquid iron and nickel?",
     ["crust", "mantle", "outer core", "inner core"], "C", "D"),
    ("What is the main function of the red blood cells in the human body?",
     ["fighting infection", "carrying oxygen", "clotting blood", "digesting fat"], "B", "A"),
    ("Which change is an example of a chemical change?",
     ["ice melting", "iron rusting", "salt dissolving", "glass breaking"], "B", "C"),
    ("A ball is dropped from a table. As it falls, its potential energy is mostly converted into which form of energy?",
     ["kinetic energy", "chemical energy", "nuclear energy", "sound energy"], "A", "D"),
    ("Which organelle is the site of photosynthesis in plant cells?",
     ["mitochondrion", "chloroplast", "nucleus", "vacuole"], "B", "A"),
    ("Why does the Moon appear to change shape over a month?",
     ["Earth's shadow covers different parts of it", "the lit portion visible from Earth changes as it orbits",
      "clouds block parts of it", "the Moon rotates faster than Earth"], "B", "A"),
    ("Which tool is best for measuring the volume of a liquid?",
     ["balance", "graduated cylinder", "thermometer", "meter stick"], "B", "A"),
    ("Which of these is a renewable energy resource?",
     ["coal", "natural gas", "wind", "petroleum"], "C", "B"),
    ("In a food chain, which organism is a producer?",
     ["hawk", "grass", "rabbit", "mushroom"], "B", "D"),
    ("What causes the seasons on Earth?",
     ["the changing distance between Earth and the Sun", "the tilt of Earth's axis",
      "the speed of Earth's rotation", "the phases of the Moon"], "B", "A"),
    ("Sound travels fastest through which material?",
     ["air", "water", "steel", "a vacuum"], "C", "B"),
    ("Which trait is most likely learned rather than inherited?",
     ["eye color", "speaking a language", "blood type", "hair texture"], "B", "D"),
    ("A sedimentary rock is most likely to contain which of the following?",
     ["fossils", "large crystals", "volcanic glass", "banded minerals from heat"], "A", "D"),
    ("Which gas do plants take in from the air for photosynthesis?",
     ["oxygen", "nitrogen", "carbon dioxide", "hydrogen"], "C", "A"),
    ("A magnet will attract which object?",
     ["a copper penny", "an iron nail", "a plastic spoon", "an aluminum can"], "B", "D"),
    ("Which body system breaks food into nutrients the body can use?",
     ["circulatory system", "digestive system", "nervous system", "skeletal system"], "B", "A"),
    ("What happens to most materials when they are heated?",
     ["they contract", "they expand", "they lose mass", "they become magnetic"], "B", "A"),
    ("Which is the best evidence that two continents were once joined?",
     ["similar fossils found on both coasts", "both have mountains", "both have rivers", "both have deserts"],
     "A", "B"),
    ("An animal that eats only plants is called a",
     ["carnivore", "herbivore", "decomposer", "predator"], "B", "A"),
    ("Which unit is used to measure electrical resistance?",
     ["volt", "ampere", "ohm", "watt"], "C", "A"),
    ("Which best explains why a metal spoon feels colder than a wooden spoon at the same temperature?",
     ["metal conducts heat away from the hand faster", "metal is always colder than wood",
      "wood produces its own heat", "metal reflects more light"], "A", "B"),
    ("Which factor most directly determines the weather on a given day?",
     ["ocean depth", "air masses and fronts", "the phase of the Moon", "the age of local rocks"], "B", "C"),
    ("A scientist repeats an experiment several times. What is the main reason?",
     ["to make the experiment take longer", "to check that results are reliable",
      "to change the hypothesis", "to use more equipment"], "B", "C"),
    ("Which of these is a single-celled organism?",
     ["bacterium", "earthworm", "fern", "frog"], "A", "C"),
    ("Which form of water vapor turning into liquid water forms clouds?",
     ["evaporation", "condensation", "melting", "sublimation"], "B", "A"),
    ("Which simple machine is a ramp?",
     ["lever", "pulley", "inclined plane", "wheel and axle"], "C", "A"),
    ("Which structure carries blood away from the heart?",
     ["vein", "artery", "capillary", "bronchus"], "B", "A"),
    ("Why is the Sun the brightest star in Earth's sky?",
     ["it is the largest star", "it is the closest star to Earth", "it is the hottest star", "it is the youngest star"],
     "B", "A"),
    ("Which event is most likely to cause a tsunami?",
     ["an undersea earthquake", "a thunderstorm", "a high tide", "a strong wind"], "A", "D"),
    ("What is the main role of decomposers in an ecosystem?",
     ["making food from sunlight", "breaking down dead matter and returning nutrients to soil",
      "hunting other animals", "pollinating flowers"], "B", "D"),
    ("Which material is the best electrical insulator?",
     ["copper", "rubber", "silver", "salt water"], "B", "D"),
    ("What is the state of matter with a definite volume but no definite shape?",
     ["solid", "liquid", "gas", "plasma"], "B", "C"),
    ("Which adaptation helps a cactus survive in the desert?",
     ["broad thin leaves", "a thick waxy stem that stores water", "shallow roots that avoid water",
      "bright flowers"], "B", "A"),
    ("Which planet is closest to the Sun?",
     ["Venus", "Mercury", "Mars", "Earth"], "B", "A"),
    ("What happens to the air pressure as a climber goes higher up a mountain?",
     ["it increases", "it decreases", "it stays the same", "it doubles"], "B", "A"),
    ("Which characteristic do all living things share?",
     ["they can move from place to place", "they are made of cells", "they make their own food",
      "they have bones"], "B", "A"),
]

# Extra source rows that are not selected (the curated pool is a subset).
ARC_UNSELECTED = [
    ("Which instrument measures air pressure?", ["barometer", "anemometer", "hygrometer", "rain gauge"], "A"),
    ("Which part of a flower makes pollen?", ["pistil", "stamen", "sepal", "petal"], "B"),
    ("Which is the largest planet in the solar system?", ["Saturn", "Jupiter", "Neptune", "Earth"], "B"),
]

CONDITIONS = {
    "Acute laryngitis": [
        "The patient has noticed that the tone of their voice has become deeper, softer, or hoarse.",
        "The patient has had a cold in the last 2 weeks.",
        "The patient has pain somewhere, related to their reason for consulting.",
        "The patient feels pain in the trachea.",
        "The patient has a fever, either felt or measured with a thermometer.",
        "The patient's pain is sensitive.",
        "The patient has a dry cough.",
        "The patient smokes cigarettes.",
        "The patient has been shouting or straining their voice recently.",
        "The intensity of the patient's pain is 3 (on a scale of 0 to 10).",
        "The patient's pain does not radiate to another location.",
        "The patient's pain appeared at a speed of 2 (on a scale of 0 to 10).",
        "The patient feels a need to clear their throat often.",
        "The patient lives with 4 or more people.",
        "The patient attends or works in a daycare.",
        "The patient has a runny nose.",
    ],
    "Viral pharyngitis": [
        "The patient has a sore throat.",
        "The patient has pain when swallowing.",
        "The patient has a fever, either felt or measured with a thermometer.",
        "The patient has a runny nose.",
        "The patient has a cough.",
        "The patient feels pain in the tonsils.",
        "The patient has been in contact with someone with similar symptoms.",
        "The patient's pain is burning.",
        "The intensity of the patient's pain is 5 (on a scale of 0 to 10).",
        "The patient feels tired and unwell.",
        "The patient's pain appeared at a speed of 4 (on a scale of 0 to 10).",
        "The patient has swollen glands in the neck.",
        "The patient has a mild headache.",
        "The patient attends or works in a daycare.",
        "The patient's pain does not radiate to another location.",
        "The patient has muscle aches.",
    ],
    "Bronchitis": [
        "The patient has a cough that produces colored or more abundant sputum than usual.",
        "The patient has had a cold in the last 2 weeks.",
        "The patient feels short of breath with mild exertion.",
        "The patient has a wheezing sound when breathing out.",
        "The patient smokes cigarettes.",
        "The patient has pain in the chest when coughing.",
        "The patient's pain is heavy.",
        "The patient has a low-grade fever.",
        "The patient feels tired.",
        "The intensity of the patient's pain is 4 (on a scale of 0 to 10).",
        "The patient's pain does not radiate to another location.",
        "The patient has a runny nose.",
        "The patient has been exposed to secondhand smoke.",
        "The patient has had symptoms for more than a week.",
        "The patient lives in a big city.",
        "The patient has a sore throat.",
    ],
    "Pneumonia": [
        "The patient has a fever, either felt or measured with a thermometer.",
        "The patient has a cough that produces colored sputum.",
        "The patient feels short of breath.",
        "The patient has chills or shivers.",
        "The patient has pain in the side of the chest that worsens on deep breaths.",
        "The patient's pain is sharp.",
        "The intensity of the patient's pain is 6 (on a scale of 0 to 10).",
        "The patient's pain appeared at a speed of 5 (on a scale of 0 to 10).",
        "The patient feels very tired.",
        "The patient has lost their appetite.",
        "The patient has had a cold in the last 2 weeks.",
        "The patient is over 65 years old or has a chronic lung condition.",
        "The patient has been sweating at night.",
        "The patient has a fast heart rate.",
        "The patient's pain does not radiate to another location.",
        "The patient smokes cigarettes.",
    ],
    "Anemia": [
        "The patient feels tired all the time.",
        "The patient feels short of breath with mild exertion.",
        "The patient feels lightheaded or dizzy.",
        "The patient has noticed that their skin is paler than usual.",
        "The patient has heavy menstrual periods or has lost blood recently.",
        "The patient has a fast heart rate.",
        "The patient follows a vegetarian diet.",
        "The patient feels cold in the hands and feet.",
        "The patient has brittle nails.",
        "The patient has headaches.",
        "The patient has a craving for ice.",
        "The patient has trouble concentrating.",
        "The patient has been taking anti-inflammatory medication regularly.",
        "The patient has a family history of anemia.",
        "The patient has noticed dark stools.",
        "The patient feels weak.",
    ],
    "GERD": [
        "The patient has a burning feeling in the chest after meals.",
        "The patient's symptoms are worse when lying down.",
        "The patient has a sour or bitter taste in the mouth.",
        "The patient has a chronic cough.",
        "The patient's pain is burning.",
        "The intensity of the patient's pain is 4 (on a scale of 0 to 10).",
        "The patient's pain is located in the upper abdomen and lower chest.",
        "The patient is overweight.",
        "The patient drinks alcohol regularly.",
        "The patient has trouble swallowing.",
        "The patient has a hoarse voice in the morning.",
        "The patient eats large meals late in the evening.",
        "The patient's pain appeared at a speed of 3 (on a scale of 0 to 10).",
        "The patient smokes cigarettes.",
        "The patient's pain does not radiate to another location.",
        "The patient feels bloated after eating.",
    ],
    "Panic attack": [
        "The patient has episodes of a racing heart.",
        "The patient feels a sudden intense fear.",
        "The patient feels short of breath during the episodes.",
        "The patient has chest tightness during the episodes.",
        "The patient feels dizzy or lightheaded.",
        "The patient has tingling in the hands.",
        "The patient is afraid of losing control.",
        "The patient has episodes that peak within 10 minutes.",
        "The patient is trembling or shaking during the episodes.",
        "The patient has been under significant stress recently.",
        "The patient drinks a lot of coffee.",
        "The patient's pain is sharp.",
        "The intensity of the patient's pain is 5 (on a scale of 0 to 10).",
        "The patient has had similar episodes before.",
        "The patient sweats a lot during the episodes.",
        "The patient has a family member with an anxiety disorder.",
    ],
    "Allergic sinusitis": [
        "The patient has a stuffy or runny nose.",
        "The patient sneezes often.",
        "The patient has itchy, watery eyes.",
        "The patient's symptoms are worse in spring or around pets.",
        "The patient has pressure in the face around the nose and eyes.",
        "The patient has a history of allergies.",
        "The patient has asthma.",
        "The patient has a cough at night.",
        "The patient has a reduced sense of smell.",
        "The patient's pain is heavy.",
        "The intensity of the patient's pain is 2 (on a scale of 0 to 10).",
        "The patient lives with a cat or a dog.",
        "The patient has a family history of allergies.",
        "The patient does not have a fever.",
        "The patient has a scratchy throat.",
        "The patient has eczema.",
    ],
    "Acute otitis media": [
        "The patient has pain in the ear.",
        "The patient has a fever, either felt or measured with a thermometer.",
        "The patient has had a cold in the last 2 weeks.",
        "The patient has trouble hearing on one side.",
        "The patient's pain is sharp.",
        "The intensity of the patient's pain is 6 (on a scale of 0 to 10).",
        "The patient's pain appeared at a speed of 6 (on a scale of 0 to 10).",
        "The patient attends or works in a daycare.",
        "The patient has fluid draining from the ear.",
        "The patient is irritable and sleeps poorly.",
        "The patient has a runny nose.",
        "The patient's pain does not radiate to another location.",
        "The patient lives with 4 or more people.",
        "The patient has been exposed to secondhand smoke.",
        "The patient has had ear infections before.",
        "The patient has a reduced appetite.",
    ],
    "Influenza": [
        "The patient has a high fever that started suddenly.",
        "The patient has muscle aches all over.",
        "The patient has a dry cough.",
        "The patient feels extremely tired.",
        "The patient has chills or shivers.",
        "The patient has a headache.",
        "The patient has a sore throat.",
        "The patient has been in contact with someone with similar symptoms.",
        "The patient did not get a flu vaccine this year.",
        "The patient's pain is heavy.",
        "The intensity of the patient's pain is 5 (on a scale of 0 to 10).",
        "The patient's symptoms appeared over a few hours.",
        "The patient has a runny nose.",
        "The patient has lost their appetite.",
        "The patient works in a hospital.",
        "The patient's pain does not radiate to another location.",
    ],
    "Epiglottitis": [
        "The patient has severe pain when swallowing.",
        "The patient is drooling.",
        "The patient has a high fever.",
        "The patient has a muffled voice.",
        "The patient prefers to sit leaning forward.",
        "The patient makes a high-pitched sound when breathing in.",
        "The patient's pain is sharp.",
        "The intensity of the patient's pain is 8 (on a scale of 0 to 10).",
        "The patient's pain appeared at a speed of 8 (on a scale of 0 to 10).",
        "The patient feels short of breath.",
        "The patient has not been vaccinated against Haemophilus influenzae.",
        "The patient feels pain in the throat, under the jaw.",
        "The patient is anxious and restless.",
        "The patient's pain does not radiate to another location.",
        "The patient has had symptoms for less than a day.",
        "The patient has trouble speaking.",
    ],
}

# Ranked negatives for each true condition (most plausible first).
DIFFERENTIALS = {
    "Acute laryngitis": ["Viral pharyngitis", "Epiglottitis", "Bronchitis", "Chagas", "Croup"],
    "Viral pharyngitis": ["Acute laryngitis", "Influenza", "Epiglottitis", "Allergic sinusitis", "Chagas"],
    "Bronchitis": ["Pneumonia", "Influenza", "GERD", "Tuberculosis", "Acute laryngitis"],
    "Pneumonia": ["Bronchitis", "Influenza", "Tuberculosis", "Pulmonary embolism", "Anemia"],
    "Anemia": ["Panic attack", "Influenza", "Pulmonary embolism", "Sarcoidosis", "GERD"],
    "GERD": ["Stable angina", "Panic attack", "Boerhaave", "Bronchitis", "Anemia"],
    "Panic attack": ["Stable angina", "GERD", "Anemia", "Pulmonary embolism", "Anaphylaxis"],
    "Allergic sinusitis": ["Viral pharyngitis", "Influenza", "Acute otitis media", "Anaphylaxis", "Bronchitis"],
    "Acute otitis media": ["Allergic sinusitis", "Viral pharyngitis", "Influenza", "Acute laryngitis", "Chagas"],
    "Influenza": ["Viral pharyngitis", "Pneumonia", "Bronchitis", "Acute laryngitis", "Tuberculosis"],
    "Epiglottitis": ["Acute laryngitis", "Viral pharyngitis", "Croup", "Anaphylaxis", "Pneumonia"],
}


def arc_rows():
    rows, selection = [], []
    for k, (q, choices, key, distractor) in enumerate(ARC):
        rid = f"arc-{k + 1:03d}"
        rows.append({"id": rid, "question": q,
                     "choices": [{"label": "ABCD"[i], "text": t} for i, t in enumerate(choices)],
                     "answerKey": key})
        selection.append({"id": rid, "distractor": distractor})
    for k, (q, choices, key) in enumerate(ARC_UNSELECTED):
        rows.append({"id": f"arc-x{k + 1:02d}", "question": q,
                     "choices": [{"label": "ABCD"[i], "text": t} for i, t in enumerate(choices)],
                     "answerKey": key})
    return rows, selection


def diagnosis_rows(rng):
    rows = []
    n = 0

    def case(condition, n_statements, negatives):
        nonlocal n
        n += 1
        stmts = rng.sample(CONDITIONS[condition], n_statements)
        ranked = list(negatives)
        ranked.insert(rng.randint(0, min(2, len(ranked))), condition)
        differential = [{"condition": c, "rank": i, "true": c == condition} for i, c in enumerate(ranked)]
        rng.shuffle(differential)  # file order is arbitrary; rank carries the order
        return {"case_id": f"dx-{n:03d}", "age": rng.randint(4, 80), "sex": rng.choice(["male", "female"]),
                "statements": stmts, "differential": differential}

    for condition in CONDITIONS:
        for _ in range(5):
            rows.append(case(condition, rng.randint(10, 15), DIFFERENTIALS[condition]))
    # filtered out by the statement-count rule
    rows.append(case("Influenza", 9, DIFFERENTIALS["Influenza"]))
    rows.append(case("GERD", 16, DIFFERENTIALS["GERD"]))
    rows.append(case("Anemia", 8, DIFFERENTIALS["Anemia"]))
    # skipped with a warning: only two negatives
    rows.append(case("Pneumonia", 12, DIFFERENTIALS["Pneumonia"][:2]))
    order = list(range(len(rows)))
    rng.shuffle(order)
    return [rows[i] for i in order]


def write_jsonl(path, rows):
    with open(path, "w", encoding="utf-8") as f:
        for r in rows:
            f.write(json.dumps(r, ensure_ascii=False, sort_keys=True) + "\n")


def main():
    seed = int(sys.argv[1]) if len(sys.argv) > 1 else 20241017
    rng = random.Random(seed)
    rows, selection = arc_rows()
    write_jsonl(ROOT / "arc" / "source.jsonl", rows)
    with open(ROOT / "arc" / "selection.json", "w", encoding="utf-8") as f:
        json.dump({"note": "reconstructed pool; not the original study items", "items": selection}, f, indent=2)
        f.write("\n")
    write_jsonl(ROOT / "diagnosis" / "cases.jsonl", diagnosis_rows(rng))


if __name__ == "__main__":
    main()
