"""Write the builtin problems, reference models and certificates to problems/."""
import pathlib

from statepop.algebra import Alphabet
from statepop.certify import adjugate_certificate, cauchy_schwarz_certificate, format_certificate
from statepop.extract import write_model
from statepop.scenarios import BUILTIN_TEXT, reference_model

out = pathlib.Path(__file__).resolve().parent.parent / "problems"
out.mkdir(exist_ok=True)
for name, text in BUILTIN_TEXT.items():
    (out / f"{name}.spop").write_text(text + "\n")
for name in ("chsh", "exa3", "bilocal-chaves", "bilocal-i3322"):
    ops, psi = reference_model(name)
    write_model(out / f"{name}_model.txt", ops, psi)
(out / "cauchy_schwarz.cert").write_text("# s(x1^2) s(x2^2) - s(x1 x2)^2 >= 0\n"
                                         + format_certificate(cauchy_schwarz_certificate()))
cert = adjugate_certificate([(0,), (1,), (1, 0)])
cert.alphabet = Alphabet(["x1", "x2"])
(out / "adjugate_minor.cert").write_text("# 3x3 Hankel minor on x1, x2, x2*x1 times e2\n" + format_certificate(cert))
(out / "bad.spop").write_text("scenario broken { parties x y; sources s -> x y; inputs x:2 y:2 }\n"
                              "objective s(x1*y1) + (s(x2*y2)\nlevel 1\n")
print("wrote", ", ".join(sorted(p.name for p in out.iterdir())))
