"""One-shot generator for gsm8k_sample50.jsonl.

Kept next to the fixture so the record format stays reproducible.  Every
<<expr=result>> annotation and every final '#### x' marker is re-derived
with the exact-rational evaluator before the file is written; a narrative
slip fails loudly here instead of silently polluting the fixture.
"""

from __future__ import annotations

import json
import re
import sys
from fractions import Fraction
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[3] / "src"))

from decomp.toolbox import eval_expr  # noqa: E402

RECORDS: list[tuple[str, str]] = [
    (
        "Janet’s ducks lay 16 eggs per day. She eats three for breakfast every morning and bakes muffins for her friends every day with four. She sells the remainder at the farmers' market daily for $2 per fresh duck egg. How much in dollars does she make every day at the farmers' market?",
        "Janet sells 16 - 3 - 4 = <<16-3-4=9>>9 duck eggs a day.\nShe makes 9 * 2 = $<<9*2=18>>18 every day at the farmer’s market.\n#### 18",
    ),
    (
        "A robe takes 2 bolts of blue fiber and half that much white fiber. How many bolts in total does it take?",
        "It takes 2/2 = <<2/2=1>>1 bolt of white fiber.\nSo the total amount of fabric is 2 + 1 = <<2+1=3>>3 bolts of fabric.\n#### 3",
    ),
    (
        "Josh decides to try flipping a house. He buys a house for $80,000 and then puts in $50,000 in repairs. This increased the value of the house by 150%. How much profit did he make?",
        "The cost of the house and repairs came out to 80,000 + 50,000 = $<<80000+50000=130000>>130,000.\nHe increased the value of the house by 80,000 * 1.5 = <<80000*1.5=120000>>120,000.\nSo the new value of the house is 120,000 + 80,000 = $<<120000+80000=200000>>200,000.\nSo he made a profit of 200,000 - 130,000 = $<<200000-130000=70000>>70,000.\n#### 70000",
    ),
    (
        "A bus starts its route with 48 passengers. At the first stop 12 passengers get off and 7 get on. At the second stop 9 passengers get off. How many passengers are on the bus now?",
        "After the first stop there are 48 - 12 = <<48-12=36>>36 passengers.\nThen 7 get on, so there are 36 + 7 = <<36+7=43>>43 passengers.\nAfter the second stop there are 43 - 9 = <<43-9=34>>34 passengers.\n#### 34",
    ),
    (
        "A school buys 15 boxes of pencils with 24 pencils in each box. The pencils are shared equally among 18 classrooms. How many pencils does each classroom get?",
        "The school has 15 * 24 = <<15*24=360>>360 pencils.\nEach classroom gets 360 / 18 = <<360/18=20>>20 pencils.\n#### 20",
    ),
    (
        "Tickets cost $8 for adults and $5 for children. A family buys 2 adult tickets and 3 child tickets. How much change do they get from $40?",
        "The adult tickets cost 2 * 8 = $<<2*8=16>>16.\nThe child tickets cost 3 * 5 = $<<3*5=15>>15.\nAll the tickets together cost 16 + 15 = $<<16+15=31>>31.\nThe change is 40 - 31 = $<<40-31=9>>9.\n#### 9",
    ),
    (
        "Mark earns $2,400 a month. He spends $1,350 on rent and $480 on groceries. How much does he save each month?",
        "After rent Mark has 2,400 - 1,350 = $<<2400-1350=1050>>1,050 left.\nAfter groceries he has 1,050 - 480 = $<<1050-480=570>>570 left to save.\n#### 570",
    ),
    (
        "A farmer plants 12 rows of 35 carrot seedlings. If 68 seedlings die, how many seedlings survive?",
        "The farmer plants 12 * 35 = <<12*35=420>>420 seedlings.\nOf those, 420 - 68 = <<420-68=352>>352 survive.\n#### 352",
    ),
    (
        "Lena swims 40 laps a week and each lap is 50 meters. How many kilometers does she swim in 5 weeks?",
        "Each week Lena swims 40 * 50 = <<40*50=2000>>2000 meters.\nIn 5 weeks she swims 2000 * 5 = <<2000*5=10000>>10000 meters.\nThat is 10000 / 1000 = <<10000/1000=10>>10 kilometers.\n#### 10",
    ),
    (
        "A bakery makes 144 rolls. They pack them into bags of 6 rolls and sell each bag for $4. How much do they earn if they sell every bag?",
        "The bakery fills 144 / 6 = <<144/6=24>>24 bags.\nSelling every bag earns 24 * 4 = $<<24*4=96>>96.\n#### 96",
    ),
    (
        "Carlos had $250. He bought a jacket for $89 and two shirts for $27 each. How much money does he have left?",
        "The shirts cost 2 * 27 = $<<2*27=54>>54.\nAltogether he spent 89 + 54 = $<<89+54=143>>143.\nHe has 250 - 143 = $<<250-143=107>>107 left.\n#### 107",
    ),
    (
        "A theater has 22 rows with 18 seats each. At tonight's show 57 seats were empty. How many people attended?",
        "The theater has 22 * 18 = <<22*18=396>>396 seats.\nWith 57 empty, 396 - 57 = <<396-57=339>>339 people attended.\n#### 339",
    ),
    (
        "Priya runs 3.5 kilometers every morning. How many kilometers does she run in 12 days?",
        "Priya runs 3.5 * 12 = <<3.5*12=42>>42 kilometers in 12 days.\n#### 42",
    ),
    (
        "A water tank holds 900 liters and is currently two-thirds full. If 150 liters are drained, how many liters remain?",
        "Two-thirds of the tank is 900 * 2 / 3 = <<900*2/3=600>>600 liters.\nAfter draining, 600 - 150 = <<600-150=450>>450 liters remain.\n#### 450",
    ),
    (
        "Sam sold 35 cups of lemonade on Saturday and twice as many on Sunday. Each cup costs $2. How much did he earn over the weekend?",
        "On Sunday Sam sold 35 * 2 = <<35*2=70>>70 cups.\nOver the weekend he sold 35 + 70 = <<35+70=105>>105 cups.\nHe earned 105 * 2 = $<<105*2=210>>210.\n#### 210",
    ),
    (
        "A library had 1,250 books. It bought 180 new books and removed 95 damaged ones. How many books does it have now?",
        "After buying, the library had 1,250 + 180 = <<1250+180=1430>>1,430 books.\nAfter removing the damaged ones it has 1,430 - 95 = <<1430-95=1335>>1,335 books.\n#### 1,335",
    ),
    (
        "Nina babysits for $12 an hour. She worked 4 hours on Friday and 5.5 hours on Saturday. How much did she earn?",
        "Nina worked 4 + 5.5 = <<4+5.5=9.5>>9.5 hours.\nShe earned 9.5 * 12 = $<<9.5*12=114>>114.\n#### 114",
    ),
    (
        "A factory produces 64 toys an hour and runs 7 hours a day. How many toys does it produce in 5 days?",
        "The factory makes 64 * 7 = <<64*7=448>>448 toys a day.\nIn 5 days it makes 448 * 5 = <<448*5=2240>>2240 toys.\n#### 2240",
    ),
    (
        "Ethan scored 78, 85, and 92 on his three tests. What is his average score?",
        "His total is 78 + 85 + 92 = <<78+85+92=255>>255 points.\nHis average is 255 / 3 = <<255/3=85>>85.\n#### 85",
    ),
    (
        "A recipe needs 0.75 cups of sugar per batch. How many cups of sugar are needed for 8 batches?",
        "The batches need 0.75 * 8 = <<0.75*8=6>>6 cups of sugar.\n#### 6",
    ),
    (
        "A train travels 60 miles per hour for 3 hours, then 45 miles per hour for 2 hours. How far does it travel in total?",
        "In the first leg the train covers 60 * 3 = <<60*3=180>>180 miles.\nIn the second leg it covers 45 * 2 = <<45*2=90>>90 miles.\nIn total it travels 180 + 90 = <<180+90=270>>270 miles.\n#### 270",
    ),
    (
        "Zoe saves $15 a week. After 8 weeks she spends $36 on a game. How much money does she have left?",
        "Zoe saved 15 * 8 = $<<15*8=120>>120.\nAfter the game she has 120 - 36 = $<<120-36=84>>84.\n#### 84",
    ),
    (
        "There are 5 vans taking 9 students each and 3 buses taking 42 students each on the field trip. How many students are going?",
        "The vans take 5 * 9 = <<5*9=45>>45 students.\nThe buses take 3 * 42 = <<3*42=126>>126 students.\nAltogether 45 + 126 = <<45+126=171>>171 students are going.\n#### 171",
    ),
    (
        "Leah bought 4 packs of stickers with 30 stickers each and gave 25 stickers to her sister. How many stickers does she keep?",
        "Leah bought 4 * 30 = <<4*30=120>>120 stickers.\nShe keeps 120 - 25 = <<120-25=95>>95 stickers.\n#### 95",
    ),
    (
        "A gardener waters 7 flowerbeds, using 18 liters per bed. His tank holds 150 liters. How many liters are left after watering?",
        "Watering takes 7 * 18 = <<7*18=126>>126 liters.\nThe tank has 150 - 126 = <<150-126=24>>24 liters left.\n#### 24",
    ),
    (
        "Oliver's battery is at 100% and drains 4 percentage points every hour. After 7 hours, what percent remains?",
        "In 7 hours the battery drains 4 * 7 = <<4*7=28>>28 points.\nThat leaves 100 - 28 = <<100-28=72>>72 percent.\n#### 72",
    ),
    (
        "A carton holds 12 eggs. A baker uses 3 cartons every day. How many eggs does he use in a 6-day week?",
        "The baker uses 12 * 3 = <<12*3=36>>36 eggs a day.\nIn 6 days he uses 36 * 6 = <<36*6=216>>216 eggs.\n#### 216",
    ),
    (
        "Ava types 55 words per minute. How many words can she type in 20 minutes?",
        "Ava types 55 * 20 = <<55*20=1100>>1100 words.\n#### 1100",
    ),
    (
        "Ben had 96 marbles. He lost a quarter of them and then won 15 more. How many marbles does he have now?",
        "Ben lost 96 / 4 = <<96/4=24>>24 marbles.\nThat left him 96 - 24 = <<96-24=72>>72 marbles.\nAfter winning more he has 72 + 15 = <<72+15=87>>87 marbles.\n#### 87",
    ),
    (
        "A store sells apples at 3 for $2. How much do 18 apples cost?",
        "18 apples make 18 / 3 = <<18/3=6>>6 groups of three.\nThey cost 6 * 2 = $<<6*2=12>>12.\n#### 12",
    ),
    (
        "Maya's book has 320 pages. She reads 45 pages a day for 6 days. How many pages are left?",
        "Maya reads 45 * 6 = <<45*6=270>>270 pages.\nShe has 320 - 270 = <<320-270=50>>50 pages left.\n#### 50",
    ),
    (
        "A parking lot charges $3 for the first hour and $2 for each additional hour. How much does 6 hours of parking cost?",
        "The additional hours are 6 - 1 = <<6-1=5>>5 hours.\nThey cost 5 * 2 = $<<5*2=10>>10.\nParking costs 3 + 10 = $<<3+10=13>>13.\n#### 13",
    ),
    (
        "A bike costs $180. With a 15% discount, what is the sale price?",
        "The discount is 180 * 0.15 = $<<180*0.15=27>>27.\nThe sale price is 180 - 27 = $<<180-27=153>>153.\n#### 153",
    ),
    (
        "A choir has 3 times as many girls as boys. If there are 12 boys, how many singers are in the choir?",
        "There are 12 * 3 = <<12*3=36>>36 girls.\nThe choir has 36 + 12 = <<36+12=48>>48 singers.\n#### 48",
    ),
    (
        "Hannah walks 0.8 kilometers to school and the same distance back every school day. How many kilometers does she walk in a 5-day school week?",
        "Each day Hannah walks 0.8 * 2 = <<0.8*2=1.6>>1.6 kilometers.\nIn 5 days she walks 1.6 * 5 = <<1.6*5=8>>8 kilometers.\n#### 8",
    ),
    (
        "A movie is 2 hours and 25 minutes long. How many minutes is that?",
        "Two hours are 2 * 60 = <<2*60=120>>120 minutes.\nThe movie is 120 + 25 = <<120+25=145>>145 minutes long.\n#### 145",
    ),
    (
        "Noah plants 6 trees every weekend. After 9 weekends, 7 of the trees have died. How many of his trees are alive?",
        "Noah planted 6 * 9 = <<6*9=54>>54 trees.\nOf those, 54 - 7 = <<54-7=47>>47 are alive.\n#### 47",
    ),
    (
        "A restaurant bought 24 kilograms of rice for $1.50 per kilogram. How much did it pay?",
        "The rice cost 24 * 1.50 = $<<24*1.50=36>>36.\n#### 36",
    ),
    (
        "Ella scored 14 points in each of her first 3 games and 21 points in the fourth. How many points did she score in total?",
        "In the first three games Ella scored 14 * 3 = <<14*3=42>>42 points.\nIn total she scored 42 + 21 = <<42+21=63>>63 points.\n#### 63",
    ),
    (
        "A ribbon 7.2 meters long is cut into pieces of 0.9 meters each. How many pieces are there?",
        "The ribbon yields 7.2 / 0.9 = <<7.2/0.9=8>>8 pieces.\n#### 8",
    ),
    (
        "Jake earns $9 an hour and worked 38 hours this week. He owes his friend $58. How much money is left after he pays his friend?",
        "Jake earned 9 * 38 = $<<9*38=342>>342.\nAfter paying his friend he has 342 - 58 = $<<342-58=284>>284.\n#### 284",
    ),
    (
        "There are 365 days in a year. If Mia jogs every fifth day, how many times does she jog in a year?",
        "Mia jogs 365 / 5 = <<365/5=73>>73 times.\n#### 73",
    ),
    (
        "A crate of oranges weighs 16 kilograms including the crate. The empty crate weighs 2.5 kilograms. What is the weight of the oranges in 4 such crates?",
        "Each crate holds 16 - 2.5 = <<16-2.5=13.5>>13.5 kilograms of oranges.\nFour crates hold 13.5 * 4 = <<13.5*4=54>>54 kilograms.\n#### 54",
    ),
    (
        "A school fundraiser sold 210 raffle tickets at $5 each. Printing the tickets cost $125. How much money did the fundraiser raise after costs?",
        "Ticket sales brought in 210 * 5 = $<<210*5=1050>>1050.\nAfter printing costs the fundraiser raised 1050 - 125 = $<<1050-125=925>>925.\n#### 925",
    ),
    (
        "Owen reads 12 pages on Monday and doubles the number of pages each day after. How many pages does he read on Thursday?",
        "On Tuesday Owen reads 12 * 2 = <<12*2=24>>24 pages.\nOn Wednesday he reads 24 * 2 = <<24*2=48>>48 pages.\nOn Thursday he reads 48 * 2 = <<48*2=96>>96 pages.\n#### 96",
    ),
    (
        "A tank is filled at 25 liters per minute for 14 minutes, then drained at 10 liters per minute for 6 minutes. How much water is in the tank?",
        "Filling adds 25 * 14 = <<25*14=350>>350 liters.\nDraining removes 10 * 6 = <<10*6=60>>60 liters.\nThe tank holds 350 - 60 = <<350-60=290>>290 liters.\n#### 290",
    ),
    (
        "Sophie shares all of her 91 candies equally among her 7 friends. Each friend then gives 3 candies back to Sophie. How many candies does Sophie end up with?",
        "Each friend receives 91 / 7 = <<91/7=13>>13 candies.\nThe friends give back 7 * 3 = <<7*3=21>>21 candies.\nSophie ends up with 21 candies.\n#### 21",
    ),
    (
        "A plane ticket costs $420 and a 10% booking fee is added. What is the total cost?",
        "The fee is 420 * 0.10 = $<<420*0.10=42>>42.\nThe total cost is 420 + 42 = $<<420+42=462>>462.\n#### 462",
    ),
    (
        "A rope 10.5 meters long is cut into 3 equal pieces. How long is each piece?",
        "Each piece is 10.5 / 3 = <<10.5/3=3.5>>3.5 meters long.\n#### 3.5",
    ),
    (
        "An office prints 1,200 pages every day. How many pages does it print in 30 days?",
        "The office prints 1,200 * 30 = <<1200*30=36000>>36,000 pages.\n#### 36000",
    ),
]

ANNOTATION_RE = re.compile(r"<<([^=>]+)=([^>]+)>>")
MARKER_RE = re.compile(r"####\s*([\d,\.]+)\s*$")


def check(question: str, answer: str) -> Fraction:
    for expr, stated in ANNOTATION_RE.findall(answer):
        got = eval_expr(expr)
        want = Fraction(stated.replace(",", ""))
        assert got == want, f"annotation <<{expr}={stated}>> is wrong: {got}"
    marker = MARKER_RE.search(answer)
    assert marker, f"no final marker in: {answer[-60:]!r}"
    return Fraction(marker.group(1).replace(",", ""))


def main() -> None:
    out = Path(__file__).parent / "gsm8k_sample50.jsonl"
    lines = []
    for question, answer in RECORDS:
        check(question, answer)
        lines.append(json.dumps({"question": question, "answer": answer}))
    assert len(lines) == 50, f"expected 50 records, have {len(lines)}"
    out.write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"wrote {len(lines)} records to {out}")


if __name__ == "__main__":
    main()
