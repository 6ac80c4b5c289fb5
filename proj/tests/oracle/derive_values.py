#!/usr/bin/env python3
"""Independent reference values for the C++ unit tests.

Evaluates the reward, advantage, objective and preference formulas directly
with Python floats / fractions and writes frozen_values.hpp. Rerun only when a
formula changes on purpose:

    python3 tests/oracle/derive_values.py > tests/oracle/frozen_values.hpp
"""
import math
from fractions import Fraction


def sigmoid(x):
    return 1.0 / (1.0 + math.exp(-x)) if x >= 0 else math.exp(x) / (1.0 + math.exp(x))


def advantages(rewards):
    g = len(rewards)
    mean = math.fsum(rewards) / g
    std = math.sqrt(math.fsum((r - mean) ** 2 for r in rewards) / g)
    return [(r - mean) / max(std, 1e-8) for r in rewards]


def k3(lc, lr):
    d = lr - lc
    return math.exp(d) - d - 1.0


def clipped(rho, a, eps):
    return min(rho * a, min(max(rho, 1 - eps), 1 + eps) * a)


def objective(outputs, rewards, cur, old, ref, eps, beta):
    a = advantages(rewards)
    total = 0.0
    for i, toks in enumerate(outputs):
        s = 0.0
        for t in range(len(toks)):
            rho = math.exp(cur[i][t] - old[i][t])
            s += clipped(rho, a[i], eps) - beta * k3(cur[i][t], ref[i][t])
        total += s / len(toks)
    return total / len(outputs)


def emit(name, value):
    print(f"inline constexpr double {name} = {value!r};")


print("#pragma once")
print("// Generated by tests/oracle/derive_values.py. Do not edit by hand.")
print()
print("namespace tandem::frozen {")
print()

# quality buckets: ceil(s / 20) over 1..100
levels = [-(-s // 20) for s in range(1, 101)]
print("inline constexpr int kQualityLevel[101] = {0, " + ", ".join(map(str, levels)) + "};")
print()

emit("kStRewardIouThird", float(Fraction(9, 10) * Fraction(1, 3) + Fraction(1, 10)))
emit("kIouThird", float(Fraction(2, 6)))
emit("kIou_1_3_vs_2_5", float(Fraction(1, 4)))
emit("kJigsawMeanN4", float(Fraction(sum(sum(1 for i, p in enumerate(perm) if p == i + 1)
                                              for perm in __import__("itertools").permutations(range(1, 5))),
                                          24 * 4)))

# J-GRPO: (judge, answer, format) in {0,1}^3 at alpha 0.5 and 0.3
for alpha_name, alpha in (("Stage1", 0.5), ("Stage2", 0.3)):
    vals = []
    for j in (0, 1):
        for ans in (0, 1):
            for f in (0, 1):
                vals.append(0.9 * (alpha * j + (1 - alpha) * ans) + 0.1 * f)
    print(f"inline constexpr double kJgrpo{alpha_name}[8] = {{" + ", ".join(repr(v) for v in vals) + "};")
emit("kJgrpoStage2JudgeWrongAnswerRight", 0.9 * 0.7 + 0.1)
print()

emit("kKlExample", k3(-1.0, -1.0 - math.log(2.0)))
emit("kKlSmall", k3(-0.2, -0.35))
emit("kBtOneZero", sigmoid(1.0))
emit("kBtMinusTwoHalf", sigmoid(-2.5))
emit("kDpoLossTen", math.log1p(math.exp(-10.0)))
emit("kDpoLossMinusThree", 3.0 + math.log1p(math.exp(-3.0)))
emit("kDpoGradHalf", -sigmoid(-0.5))
emit("kImplicitReward", 0.1 * ((-0.5 - 1.25 - 0.75) - (-0.25 - 1.5 - 1.0)))
print()

adv = advantages([0.2, 0.9, 0.4, 0.4, 1.0])
print("inline constexpr double kAdvantages5[5] = {" + ", ".join(repr(v) for v in adv) + "};")
adv = advantages([1.0, 0.0])
print("inline constexpr double kAdvantages2[2] = {" + ", ".join(repr(v) for v in adv) + "};")
print()

# Small hand instance: G = 3, lengths 2, 1, 3, ratios inside and outside the clip range.
outputs = [[1, 2], [0], [2, 2, 1]]
rewards = [1.0, 0.0, 0.5]
cur = [[-0.9, -1.2], [-0.4], [-1.0, -0.7, -2.0]]
old = [[-1.1, -1.0], [-0.9], [-1.0, -0.75, -1.6]]
ref = [[-1.0, -1.3], [-0.6], [-0.8, -0.7, -1.9]]
emit("kObjectiveHand", objective(outputs, rewards, cur, old, ref, 0.2, 0.04))
emit("kObjectiveHandNoKl", objective(outputs, rewards, cur, old, ref, 0.2, 0.0))
emit("kObjectiveG2", objective([[3], [4]], [1.0, 0.0], [[-0.5], [-0.7]], [[-0.5], [-0.7]],
                               [[-0.5], [-0.7]], 0.2, 0.0))
print()
print("}  // namespace tandem::frozen")
