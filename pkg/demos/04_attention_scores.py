#!/usr/bin/env python3
"""Per-atom attention scores for interpretability.

Each atom's importance is the mean of its outgoing attention weights in the
last message-passing layer, min-max normalized per molecule.
"""

from grappa import Architecture, attention_scores, featurize, init_model, parse_smiles

model = init_model(Architecture(), seed=7)

for smiles in ["CCO", "CC(=O)Oc1ccccc1", "FC(F)(F)c1ccccc1"]:
    mol = parse_smiles(smiles)
    scores = attention_scores(featurize(mol), model.gat)
    print(f"\n{smiles}")
    for i, (atom, score) in enumerate(zip(mol.atoms, scores)):
        bar = "#" * int(round(score * 30))
        print(f"  {i:2d} {atom.element:>2s} {score:5.2f} {bar}")
