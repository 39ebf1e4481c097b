"""Regenerate src/teleik/models/astro17.json.

Keeps the left/right arm mirror exact and the collision pair list complete
(all body combinations minus pairs joined by a joint).
"""

import itertools
import json
import pathlib

OUT = pathlib.Path(__file__).resolve().parents[1] / "src" / "teleik" / "models" / "astro17.json"

X, Y, Z = [1, 0, 0], [0, 1, 0], [0, 0, 1]


def origin(x=0.0, y=0.0, z=0.0):
    return {"position": [x, y, z], "orientation": [0, 0, 0, 1]}


def joint(name, parent, child, axis, org, limits, vel):
    return {
        "name": name,
        "kind": "revolute",
        "parent": parent,
        "child": child,
        "axis": axis,
        "origin": org,
        "position_limits": limits,
        "velocity_limit": vel,
    }


def arm(side, sign):
    s = side
    return [
        joint(f"{s}_shoulder_pitch", "chest", f"{s}_shoulder_pitch_link", Y,
              origin(0, sign * 0.18, 0.18), [-2.8, 2.8], 4.0),
        joint(f"{s}_shoulder_roll", f"{s}_shoulder_pitch_link", f"{s}_shoulder_roll_link", X,
              origin(0, sign * 0.06, 0), [-1.2, 2.6] if sign > 0 else [-2.6, 1.2], 4.0),
        joint(f"{s}_shoulder_yaw", f"{s}_shoulder_roll_link", f"{s}_upperarm", Z,
              origin(0, 0, -0.10), [-2.6, 2.6], 4.0),
        joint(f"{s}_elbow", f"{s}_upperarm", f"{s}_forearm", Y,
              origin(0, 0, -0.16), [-2.5, 0.05], 4.0),
        joint(f"{s}_wrist_yaw", f"{s}_forearm", f"{s}_wrist_link", Z,
              origin(0, 0, -0.15), [-2.6, 2.6], 5.0),
        joint(f"{s}_wrist_pitch", f"{s}_wrist_link", f"{s}_hand", Y,
              origin(0, 0, -0.10), [-1.6, 1.6], 5.0),
    ]


links = [
    "base", "torso_link", "chest",
    "neck_yaw_link", "neck_pitch_link", "head",
    "l_shoulder_pitch_link", "l_shoulder_roll_link", "l_upperarm",
    "l_forearm", "l_wrist_link", "l_hand",
    "r_shoulder_pitch_link", "r_shoulder_roll_link", "r_upperarm",
    "r_forearm", "r_wrist_link", "r_hand",
]

joints = [
    joint("torso_pitch", "base", "torso_link", Y, origin(0, 0, 0.10), [-0.3, 0.8], 2.0),
    joint("torso_yaw", "torso_link", "chest", Z, origin(0, 0, 0.15), [-1.2, 1.2], 2.0),
    joint("neck_yaw", "chest", "neck_yaw_link", Z, origin(0, 0, 0.22), [-1.3, 1.3], 3.0),
    joint("neck_pitch", "neck_yaw_link", "neck_pitch_link", Y, origin(0, 0, 0.05), [-0.8, 0.8], 3.0),
    joint("neck_roll", "neck_pitch_link", "head", X, origin(0, 0, 0.05), [-0.6, 0.6], 3.0),
    *arm("l", +1),
    *arm("r", -1),
]

frames = {
    "torso": {"link": "chest", "origin": origin()},
    "head": {"link": "head", "origin": origin(0, 0, 0.08)},
    "l_hand": {"link": "l_hand", "origin": origin(0, 0, -0.06)},
    "r_hand": {"link": "r_hand", "origin": origin(0, 0, -0.06)},
}

names = [j["name"] for j in joints]
groups = {
    "torso_pitch": [names.index("torso_pitch")],
    "torso_yaw": [names.index("torso_yaw")],
    "neck": [names.index(n) for n in ("neck_yaw", "neck_pitch", "neck_roll")],
    "l_arm": [names.index(f"l_{n}") for n in
              ("shoulder_pitch", "shoulder_roll", "shoulder_yaw", "elbow", "wrist_yaw", "wrist_pitch")],
    "r_arm": [names.index(f"r_{n}") for n in
              ("shoulder_pitch", "shoulder_roll", "shoulder_yaw", "elbow", "wrist_yaw", "wrist_pitch")],
}


def capsule(name, link, a, b, r):
    return {"name": name, "link": link, "kind": "capsule", "a": a, "b": b, "radius": r}


def sphere(name, link, c, r):
    return {"name": name, "link": link, "kind": "sphere", "center": c, "radius": r}


bodies = [
    capsule("torso", "chest", [0, 0, -0.22], [0, 0, 0.10], 0.11),
    sphere("head", "head", [0, 0, 0.05], 0.10),
]
for s in ("l", "r"):
    bodies += [
        capsule(f"{s}_upperarm", f"{s}_upperarm", [0, 0, 0.08], [0, 0, -0.16], 0.05),
        capsule(f"{s}_forearm", f"{s}_forearm", [0, 0, 0], [0, 0, -0.15], 0.045),
        sphere(f"{s}_hand", f"{s}_hand", [0, 0, -0.04], 0.05),
    ]

link_of = {b["name"]: b["link"] for b in bodies}
parent_of = {j["child"]: j["parent"] for j in joints}


def depth_chain(link):
    chain = [link]
    while chain[-1] in parent_of:
        chain.append(parent_of[chain[-1]])
    return chain


def joint_distance(a, b):
    ca, cb = depth_chain(a), depth_chain(b)
    sa = set(ca)
    for i, link in enumerate(cb):
        if link in sa:
            return ca.index(link) + i
    return len(ca) + len(cb)


pairs = []
for a, b in itertools.combinations([b["name"] for b in bodies], 2):
    # skip bodies within two joints of each other: they can barely move
    # relative to one another and would only add a permanent near-contact
    if joint_distance(link_of[a], link_of[b]) <= 2:
        continue
    pairs.append({"a": a, "b": b, "margin": 0.005})

# ready pose: elbows bent, arms slightly forward and out, clear of singularities
home = {}
for s, sign in (("l", +1), ("r", -1)):
    home[f"{s}_shoulder_pitch"] = -0.3
    home[f"{s}_shoulder_roll"] = sign * 0.15
    home[f"{s}_elbow"] = -0.8
    home[f"{s}_wrist_pitch"] = 0.3

doc = {
    "name": "astro17",
    "links": links,
    "joints": joints,
    "frames": frames,
    "groups": groups,
    "home": home,
    "collision_bodies": bodies,
    "collision_pairs": pairs,
}

OUT.write_text(json.dumps(doc, indent=1) + "\n")
print(f"wrote {OUT} ({len(joints)} joints, {len(bodies)} bodies, {len(pairs)} pairs)")
