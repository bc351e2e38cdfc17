"""Bundled fixture corpus: sample disclosures plus synthetic filings with ground truth.

:func:`build_corpus` writes a self-contained directory that the pipeline can
run on without network access::

    <root>/cache/<cik>/<accession>.htm   filings, laid out like the download cache
    <root>/manifest.csv                  filing manifest
    <root>/payratio_truth.csv            expected pay-ratio values per proxy
    <root>/cam_truth.csv                 expected CAM components per 10-K
    <root>/config.yaml                   pipeline config using the offline backend

Everything is generated from a seeded RNG, so the corpus is byte-stable.
"""

from __future__ import annotations

import html
import random
from dataclasses import dataclass, field
from datetime import date
from importlib import resources
from pathlib import Path

import yaml

from .csvio import write_rows
from .edgar import FilingRecord, cache_path_for, filing_index_url, write_manifest

# -- neutral filler ---------------------------------------------------------
# None of these sentences mention dollar amounts, ratios or audit report
# markers, so they never change what the extractors find.

_FILLER = [
    "The Board of Directors meets regularly to review the strategy of the Company and the "
    "performance of its business segments.",
    "Directors are expected to attend the annual meeting and each meeting of the committees "
    "on which they serve.",
    "The Nominating and Governance Committee reviews the composition of the Board each year "
    "and recommends candidates for election.",
    "Shareholders may communicate with the Board by writing to the Corporate Secretary at the "
    "principal executive offices of the Company.",
    "The Audit Committee oversees the integrity of the financial statements and the "
    "qualifications and independence of the independent registered public accounting firm.",
    "Our code of business conduct applies to all directors, officers and team members and is "
    "available on our website.",
    "The Company operates manufacturing facilities in several regions and distributes its "
    "products through direct and indirect channels.",
    "Demand for our products depends on general economic conditions, customer budgets and the "
    "timing of large projects.",
    "We continue to invest in research and development to extend our product portfolio and "
    "improve the efficiency of our operations.",
    "Competition in our markets is based on product quality, service, delivery performance and "
    "breadth of offering.",
    "Our operations are subject to environmental, health and safety regulations in each "
    "jurisdiction in which we operate.",
    "The Compensation Committee retains an independent consultant to advise on program design "
    "and market practices.",
    "Proxies properly submitted before the meeting will be voted as directed by the "
    "shareholder submitting them.",
    "Information about our sustainability programs is described in our annual corporate "
    "responsibility report.",
    "The risk oversight function of the Board is carried out both by the full Board and by "
    "its standing committees.",
    "Seasonal patterns in customer ordering have historically caused revenue to be higher in "
    "the second half of the fiscal year.",
]

_PROXY_HEADINGS = ["Corporate Governance", "Board Committees", "Director Nominations",
                   "Shareholder Communications", "Compensation Discussion and Analysis",
                   "Risk Oversight", "Other Matters", "Householding of Proxy Materials",
                   "Security Ownership of Certain Beneficial Owners"]
_10K_HEADINGS = ["Item 1. Business", "Item 1A. Risk Factors", "Item 2. Properties",
                 "Item 3. Legal Proceedings", "Item 7. Management's Discussion and Analysis",
                 "Item 7A. Quantitative and Qualitative Disclosures About Market Risk"]

_NAME_A = ["Northwind", "Bluegate", "Harbor", "Summit", "Redwood", "Ironclad", "Clearwater",
           "Meridian", "Granite", "Silverline", "Oakmont", "Brightpath", "Cobalt", "Lakeshore"]
_NAME_B = ["Industries", "Holdings", "Technologies", "Brands", "Systems", "Materials",
           "Logistics", "Therapeutics", "Energy", "Networks"]
_FIRMS = ["Ashford & Lane LLP", "Beacon Audit Partners LLP", "Carver Whitley LLP",
          "Dunmore Reed LLP"]
_CITIES = ["Chicago, Illinois", "Boston, Massachusetts", "Denver, Colorado", "Dallas, Texas",
           "Seattle, Washington"]

_CAM_TOPICS = [
    ("Goodwill impairment assessment for the {seg} reporting unit",
     "The Company performs its annual goodwill impairment test by comparing the fair value of "
     "each reporting unit with its carrying amount. Fair value of the {seg} reporting unit was "
     "estimated using a discounted cash flow model.",
     "Auditing the fair value estimate was complex because of the judgment required in "
     "selecting the discount rate and forecasting revenue growth and operating margins."),
    ("Revenue recognition for contracts with multiple performance obligations",
     "The Company enters into contracts that combine equipment, installation and extended "
     "service. Management allocates the transaction price to each obligation based on its "
     "standalone selling price.",
     "Evaluating the standalone selling prices required significant auditor judgment because "
     "observable prices were not available for several service offerings."),
    ("Valuation of excess and obsolete inventory",
     "The Company records a reserve for inventory that is expected to exceed demand or to "
     "become obsolete. The reserve is estimated from forecasted usage and historical "
     "write-off experience.",
     "Testing the reserve involved especially subjective judgment because forecasted usage is "
     "sensitive to changes in customer demand and product transitions."),
    ("Uncertain tax positions in foreign jurisdictions",
     "The Company operates in multiple tax jurisdictions and is subject to examination by tax "
     "authorities. Management recognizes tax benefits only when they are more likely than not "
     "to be sustained.",
     "Assessing the recognition and measurement of these positions required complex judgment "
     "about the interpretation of tax law and the outcome of examinations."),
    ("Fair value of customer relationship intangible assets acquired",
     "During the year the Company completed a business combination and recognized customer "
     "relationship intangible assets. Fair value was determined using a multi-period excess "
     "earnings method.",
     "The estimate was sensitive to assumptions about customer attrition and forecasted "
     "revenue, which required a high degree of auditor judgment."),
    ("Self-insured workers compensation liabilities",
     "The Company is self-insured for workers compensation claims up to certain retention "
     "levels. The liability includes claims reported and an estimate of claims incurred but not "
     "reported.",
     "Auditing the liability was challenging because actuarial assumptions about claim "
     "development patterns involve significant estimation uncertainty."),
]
_SEGMENTS = ["Industrial", "Consumer", "Healthcare", "Aerospace", "Retail"]
_PROC_BULLETS = [
    "We tested the effectiveness of controls over management's review of the significant "
    "assumptions.",
    "We evaluated the reasonableness of management's forecasts by comparing them with "
    "historical results and industry data.",
    "We involved valuation professionals with specialized skills to assist in evaluating the "
    "methodology and significant assumptions.",
    "We performed sensitivity analyses of the significant assumptions to evaluate the effect on "
    "the estimate.",
    "We tested the completeness and accuracy of the underlying data used by management.",
]

_CAM_BOILERPLATE = (
    "The critical audit matters communicated below are matters arising from the current period "
    "audit of the consolidated financial statements that were communicated or required to be "
    "communicated to the audit committee and that relate to accounts or disclosures that are "
    "material to the consolidated financial statements and involved our especially challenging, "
    "subjective, or complex judgments. The communication of critical audit matters does not "
    "alter in any way our opinion on the consolidated financial statements, taken as a whole.")


@dataclass
class PayTruth:
    doc_id: str
    ceo_pay: str
    median_pay: str
    ratio_value: str


@dataclass
class CamTruth:
    doc_id: str
    cam_number: int
    title: str
    description: str
    procedure: str


@dataclass
class Filing:
    record: FilingRecord
    html: str
    kind: str
    pay: PayTruth | None = None
    cams: list[CamTruth] = field(default_factory=list)
    expected_status: str = ""


def _p(text: str) -> str:
    return f"<p>{html.escape(text, quote=False)}</p>"


def _filler(rng: random.Random, n_paragraphs: int, headings: list[str]) -> str:
    out = []
    for i in range(n_paragraphs):
        if i % 3 == 0:
            out.append(f"<h3>{html.escape(rng.choice(headings))}</h3>")
        sentences = rng.sample(_FILLER, 4)
        out.append(_p(" ".join(sentences)))
    return "\n".join(out)


def _sample(name: str) -> str:
    path = resources.files("secextract").joinpath(f"data/samples/{name}.html")
    return path.read_text(encoding="utf-8")


def _money(v: int) -> str:
    return f"{v:,}"


def _record(cik: int, seq: int, form: str, filed: date, company: str) -> FilingRecord:
    acc = f"{cik:010d}-{filed.year % 100:02d}-{seq:06d}"
    rec = FilingRecord(cik, acc, form, filed, filing_index_url(cik, acc), company,
                       f"https://www.sec.gov/Archives/edgar/data/{cik}/{acc.replace('-', '')}/"
                       f"{'proxy' if form == 'DEF 14A' else 'annual'}.htm")
    return rec


def _page(title: str, body: str) -> str:
    return ("<html><head><title>" + html.escape(title) + "</title>"
            "<style>p {margin: 0}</style></head><body>\n" + body + "\n</body></html>\n")


def _proxy(rng: random.Random, company: str, disclosure: str, before: int = 9,
           after: int = 9) -> str:
    body = "\n".join([
        _p(company.upper()),
        _p("NOTICE OF ANNUAL MEETING OF SHAREHOLDERS AND PROXY STATEMENT"),
        _filler(rng, before, _PROXY_HEADINGS),
        "<h2>Executive Compensation</h2>",
        _filler(rng, 3, ["Compensation Philosophy"]),
        disclosure,
        _filler(rng, after, _PROXY_HEADINGS),
    ])
    return _page(f"{company} proxy statement", body)


# -- pay-ratio disclosures ----------------------------------------------------

def _pay_values(rng: random.Random) -> tuple[int, int, int]:
    median = rng.randrange(28_000, 160_000)
    ratio = rng.randrange(15, 450)
    ceo = median * ratio + rng.randrange(-int(median * 0.4), int(median * 0.4))
    return ceo, median, ratio


def _narrative(year: int, ceo: int, median: int, ratio_text: str) -> str:
    return "\n".join([
        "<h3>Pay Ratio</h3>",
        _p("We are providing the following information about the relationship of the annual "
           "total compensation of our median employee and the annual total compensation of our "
           "Chief Executive Officer."),
        _p(f"For {year}, the annual total compensation of our median employee was "
           f"${_money(median)}, and the annual total compensation of our Chief Executive Officer "
           f"was ${_money(ceo)}. Based on this information, the ratio of the annual total "
           f"compensation of our Chief Executive Officer to that of our median employee was "
           f"{ratio_text}."),
        _p("We identified the median employee using base salary and wages as a consistently "
           "applied compensation measure for all individuals employed on the determination "
           "date."),
    ])


def _bullets(year: int, ceo: int, median: int, ratio: int) -> str:
    return "\n".join([
        "<h3>CEO Pay Ratio</h3>",
        _p(f"For {year}, our last completed fiscal year:"),
        "<ul>",
        f"<li>the annual total compensation of our median employee was ${_money(median)};</li>",
        f"<li>the annual total compensation of our CEO was ${_money(ceo)}; and</li>",
        f"<li>the ratio of these amounts was {ratio}:1.</li>",
        "</ul>",
        _p("This ratio is a reasonable estimate calculated in a manner consistent with the "
           "applicable disclosure rules."),
    ])


def _table(year: int, ceo: int, median: int, ratio: int) -> str:
    salary_c, salary_m = ceo // 5, median * 9 // 10
    rows = [("Base Salary", salary_c, salary_m),
            ("Annual Incentive", ceo * 3 // 10, median // 20),
            ("Total Annual Compensation", ceo, median)]
    cells = "\n".join(f"<tr><td>{lbl}</td><td>$</td><td>{_money(c)}</td><td>$</td>"
                      f"<td>{_money(m)}</td></tr>" for lbl, c, m in rows)
    return "\n".join([
        "<h3>Pay Ratio Disclosure</h3>",
        _p(f"The table below compares the {year} compensation of our CEO with that of our "
           f"median employee."),
        "<table>",
        "<tr><td></td><td></td><td>CEO</td><td></td><td>Median Employee</td></tr>",
        cells,
        "</table>",
        _p(f"Ratio of CEO compensation to median employee compensation: {ratio}:1"),
    ])


def _pay_filings(rng: random.Random) -> list[Filing]:
    filings: list[Filing] = []
    seq = 1

    def add(kind: str, disclosure: str, truth: tuple[str, str, str] | None,
            before: int = 9, after: int = 9) -> None:
        nonlocal seq
        cik = 9_100_000 + seq
        company = f"{rng.choice(_NAME_A)} {rng.choice(_NAME_B)}, Inc."
        filed = date(2019 + (seq - 1) % 5, 4, 1 + seq % 27)
        rec = _record(cik, seq, "DEF 14A", filed, company)
        seq += 1
        doc = _proxy(rng, company, disclosure, before, after)
        pay = PayTruth(rec.doc_id, *truth) if truth else None
        filings.append(Filing(rec, doc, kind, pay))

    for fmt in ("to 1", ":1", "times", "decimal"):
        ceo, median, ratio = _pay_values(rng)
        year = 2018 + len(filings)
        if fmt == "to 1":
            text, ratio_s = f"{ratio} to 1", str(ratio)
        elif fmt == ":1":
            text, ratio_s = f"{ratio}:1", str(ratio)
        elif fmt == "times":
            text, ratio_s = f"approximately {ratio} times", str(ratio)
        else:
            ratio_s = f"{ceo / median:.1f}"
            text = f"{ratio_s} to 1"
        add(f"narrative-{fmt}", _narrative(year, ceo, median, text),
            (str(ceo), str(median), ratio_s))
    for _ in range(3):
        ceo, median, ratio = _pay_values(rng)
        add("bullets", _bullets(2020, ceo, median, ratio), (str(ceo), str(median), str(ratio)))
    for _ in range(3):
        ceo, median, ratio = _pay_values(rng)
        add("table", _table(2021, ceo, median, ratio), (str(ceo), str(median), str(ratio)))

    # CEO pay stated in millions
    median = rng.randrange(40_000, 90_000)
    ratio = round(6_350_000 / median)
    add("million-unit", _narrative(2022, 0, median, f"{ratio} to 1").replace(
        "$0,", "$6.35 million,").replace("was $0.", "was $6.35 million."),
        ("6350000", str(median), str(ratio)))

    # no heading anywhere: only the median-employee fallback finds it
    ceo, median, ratio = _pay_values(rng)
    body = _narrative(2021, ceo, median, f"{ratio} to 1").replace("<h3>Pay Ratio</h3>",
                                                                 "<h3>Other Disclosures</h3>")
    add("median-fallback", body, (str(ceo), str(median), str(ratio)))

    # a heading with no median mention in its window, disclosure far below it
    ceo, median, ratio = _pay_values(rng)
    body = "\n".join(["<h3>Pay Ratio</h3>", _p("See the compensation section of this document."),
                      _filler(rng, 24, _PROXY_HEADINGS),
                      _narrative(2021, ceo, median, f"{ratio} to 1").replace(
                          "<h3>Pay Ratio</h3>", "<h3>Compensation Comparison</h3>")])
    add("filtered-heading", body, (str(ceo), str(median), str(ratio)))

    # the same disclosure summarized under a second heading
    ceo, median, ratio = _pay_values(rng)
    summary = "\n".join(["<h3>CEO Pay Ratio</h3>",
                         _p(f"Our median employee earned ${_money(median)} and our CEO earned "
                            f"${_money(ceo)}, a ratio of {ratio}:1.")])
    body = "\n".join([summary, _filler(rng, 18, _PROXY_HEADINGS),
                      _narrative(2020, ceo, median, f"{ratio}:1")])
    add("duplicate-heading", body, (str(ceo), str(median), str(ratio)))

    add("not-applicable", "\n".join([
        "<h3>Pay Ratio</h3>",
        _p("As a smaller reporting company, we are not required to provide a pay ratio "
           "disclosure.")]), None)
    add("no-employees", "\n".join([
        "<h3>Pay Ratio</h3>",
        _p("We do not have any employees. Our officers are employed by our external manager, "
           "and no pay ratio disclosure is presented.")]), None)
    return filings


_SAMPLE_PROXIES = [
    ("proxy_irobot_2022", 1159167, "0001159167-22-000019", date(2022, 4, 8), "iRobot Corp",
     ("6,273,391", "122,236", "51")),
    ("proxy_veeco_2018", 103145, "0001104659-18-018471", date(2018, 3, 21), "Veeco Instruments",
     ("2,402,882", "141,390", "17.0")),
    ("proxy_viad_2019", 884219, "0001564590-19-010690", date(2019, 4, 4), "Viad Corp",
     ("3,741,915", "5,501", "680")),
    ("proxy_everest_2022", 1095073, "0001095073-22-000007", date(2022, 3, 28), "Everest Group",
     ("8,864,322", "151,276", "58.60")),
]


def _num(raw: str) -> str:
    return raw.replace(",", "")


def sample_proxy_filings(rng: random.Random) -> list[Filing]:
    out = []
    for name, cik, acc, filed, company, (ceo, med, ratio) in _SAMPLE_PROXIES:
        rec = FilingRecord(cik, acc, "DEF 14A", filed, filing_index_url(cik, acc), company,
                           f"https://www.sec.gov/Archives/edgar/data/{cik}/"
                           f"{acc.replace('-', '')}/{name}.htm")
        doc = _proxy(rng, company, _sample(name))
        out.append(Filing(rec, doc, name, PayTruth(rec.doc_id, _num(ceo), _num(med), ratio)))
    return out


# -- 10-K auditor reports -----------------------------------------------------

def _cam_content(rng: random.Random, k: int) -> list[tuple[str, list[str], list[str]]]:
    topics = rng.sample(_CAM_TOPICS, k)
    out = []
    for title, d1, d2 in topics:
        seg = rng.choice(_SEGMENTS)
        title, d1 = title.format(seg=seg), d1.format(seg=seg)
        bullets = rng.sample(_PROC_BULLETS, 3)
        out.append((title, [d1, d2], bullets))
    return out


def _cams_narrative(cams) -> tuple[str, list[tuple[str, str, str]]]:
    parts, truth = [], []
    for title, desc, bullets in cams:
        intro = ("The primary procedures we performed to address this critical audit matter "
                 "included the following.")
        parts += [_p(title)] + [_p(d) for d in desc] + [_p(intro), "<ul>"]
        parts += [f"<li>{html.escape(b, quote=False)}</li>" for b in bullets] + ["</ul>"]
        truth.append((title, " ".join(desc), " ".join([intro] + bullets)))
    return "\n".join(parts), truth


def _cams_labeled(cams) -> tuple[str, list[tuple[str, str, str]]]:
    parts, truth = [], []
    for title, desc, bullets in cams:
        proc = ["We obtained an understanding of the process and tested the design of the "
                "relevant controls."] + bullets
        parts.append("<table>")
        parts.append(f"<tr><td></td><td>{html.escape(title, quote=False)}</td></tr>")
        parts.append("<tr><td><i>Description of the Matter</i></td><td>"
                     + "".join(_p(d) for d in desc) + "</td></tr>")
        parts.append("<tr><td><i>How We Addressed the Matter in Our Audit</i></td><td>"
                     + "".join(_p(x) for x in proc) + "</td></tr>")
        parts.append("</table>")
        truth.append((title, " ".join(desc), " ".join(proc)))
    return "\n".join(parts), truth


def _cams_refer(cams) -> tuple[str, list[tuple[str, str, str]]]:
    parts, truth = [], []
    for n, (title, desc, bullets) in enumerate(cams, 2):
        full = f"{title} \u2014 Refer to Note {n} to the financial statements"
        intro = (f"Our audit procedures related to the {title[0].lower() + title[1:]} included "
                 f"the following, among others.")
        parts += [_p(full), "<p><i>Critical Audit Matter Description</i></p>"]
        parts += [_p(d) for d in desc]
        parts += ["<p><i>How the Critical Audit Matter Was Addressed in the Audit</i></p>",
                  _p(intro), "<ul>"]
        parts += [f"<li>{html.escape(b, quote=False)}</li>" for b in bullets] + ["</ul>"]
        truth.append((full, " ".join(desc), " ".join([intro] + bullets)))
    return "\n".join(parts), truth


def _report(company: str, firm: str, city: str, year: int, cam_block: str | None, *,
            start_marker: bool = True, tenure: str = "auditor") -> str:
    opening = ("We have audited the accompanying" if start_marker
               else "We audited the")
    parts = [
        "<h2>Report of Independent Registered Public Accounting Firm</h2>",
        _p(f"To the Shareholders and Board of Directors of {company}"),
        "<h3>Opinion on the Financial Statements</h3>",
        _p(f"{opening} consolidated balance sheets of {company} (the Company) as of December 31, "
           f"{year} and {year - 1}, the related consolidated statements of operations, "
           f"comprehensive income, shareholders' equity and cash flows for each of the years in "
           f"the three-year period ended December 31, {year}, and the related notes. In our "
           f"opinion, the consolidated financial statements present fairly, in all material "
           f"respects, the financial position of the Company in conformity with U.S. generally "
           f"accepted accounting principles."),
        "<h3>Basis for Opinion</h3>",
        _p("These consolidated financial statements are the responsibility of the Company's "
           "management. Our responsibility is to express an opinion on these consolidated "
           "financial statements based on our audits. We conducted our audits in accordance "
           "with the standards of the Public Company Accounting Oversight Board. Those standards "
           "require that we plan and perform the audit to obtain reasonable assurance about "
           "whether the consolidated financial statements are free of material misstatement."),
    ]
    if cam_block is not None:
        parts += ["<h3>Critical Audit Matters</h3>", _p(_CAM_BOILERPLATE), cam_block]
    parts.append(_p(f"/s/ {firm}"))
    since = 2001 + len(company) % 15
    if tenure == "auditor":
        parts.append(_p(f"We have served as the Company's auditor since {since}."))
    else:
        parts.append(_p(f"We have served as the Company's independent registered public "
                        f"accounting firm since {since}."))
    parts.append(_p(f"{city}"))
    parts.append(_p(f"February 24, {year + 1}"))
    return "\n".join(parts)


def _ten_k(rng: random.Random, company: str, report: str) -> str:
    body = "\n".join([
        _p(company.upper()),
        _p("ANNUAL REPORT ON FORM 10-K"),
        _filler(rng, 12, _10K_HEADINGS),
        "<h2>Item 8. Financial Statements and Supplementary Data</h2>",
        report,
        "<h2>Consolidated Balance Sheets</h2>",
        _filler(rng, 6, ["Notes to Consolidated Financial Statements"]),
    ])
    return _page(f"{company} annual report", body)


def sample_10k_filings(rng: random.Random) -> list[Filing]:
    out = []
    # free-form narrative sample inside a complete report
    rec = _record(896156, 1, "10-K", date(2021, 8, 13), "Ethan Allen Interiors Inc")
    sample = _sample("cam_ethan_allen_2021")
    cam_block = sample.split("</p>", 2)[2]  # drop the sample's own heading and boilerplate
    report = _report(rec.company, "KPMG LLP", "Hartford, Connecticut", 2021, cam_block)
    truth = CamTruth(
        rec.doc_id, 1, "Assessment of the carrying value of retail design center long-lived assets",
        *_ethan_allen_parts(sample))
    out.append(Filing(rec, _ten_k(rng, rec.company, report), "cam_ethan_allen_2021", None,
                      [truth], "BegEnd"))
    # structured table sample; the report opening lacks the standard marker
    rec = _record(1568100, 2, "10-K", date(2022, 3, 25), "PagerDuty, Inc.")
    report = _report(rec.company, "Ernst & Young LLP", "San Jose, California", 2022,
                     _sample("cam_pagerduty_2022"), start_marker=False)
    truth = CamTruth(rec.doc_id, 1, "Revenue Recognition", *_pagerduty_parts())
    out.append(Filing(rec, _ten_k(rng, rec.company, report), "cam_pagerduty_2022", None,
                      [truth], "CamEnd"))
    return out


def _paragraphs(fragment: str) -> list[str]:
    from .parsing import html_to_text

    text = html_to_text(fragment).text
    return [ln.strip() for ln in text.split("\n") if ln.strip()]


def _ethan_allen_parts(sample: str) -> tuple[str, str]:
    paras = _paragraphs(sample)[3:]  # heading, boilerplate, title
    proc_at = next(i for i, p in enumerate(paras) if p.startswith("The following are the primary"))
    return " ".join(paras[:proc_at]), " ".join(paras[proc_at:])


def _pagerduty_parts() -> tuple[str, str]:
    paras = _paragraphs(_sample("cam_pagerduty_2022"))
    d = paras.index("Description of the Matter")
    h = paras.index("How We Addressed the Matter in Our Audit")
    return " ".join(paras[d + 1:h]), " ".join(paras[h + 1:])


def _cam_filings(rng: random.Random) -> list[Filing]:
    filings: list[Filing] = []
    seq = 1
    plans = [("narrative", 1, "BegEnd"), ("narrative", 2, "BegEnd"), ("narrative", 3, "BegEnd"),
             ("narrative", 2, "BegEnd"), ("labeled", 1, "BegEnd"), ("labeled", 2, "BegEnd"),
             ("refer", 2, "BegEnd"), ("labeled", 2, "CamEnd"), ("narrative", 2, "CamEst"),
             ("none", 0, "NoCam"), ("declared-none", 0, "BegEnd")]
    for style, k, status in plans:
        cik = 9_200_000 + seq
        company = f"{rng.choice(_NAME_A)} {rng.choice(_NAME_B)} Corporation"
        filed = date(2020 + (seq - 1) % 4, 2, 10 + seq)
        rec = _record(cik, seq, "10-K", filed, company)
        seq += 1
        truth: list[tuple[str, str, str]] = []
        if style == "none":
            block = None
        elif style == "declared-none":
            block = _p("We determined that there are no critical audit matters.")
        else:
            render = {"narrative": _cams_narrative, "labeled": _cams_labeled,
                      "refer": _cams_refer}[style]
            block, truth = render(_cam_content(rng, k))
        report = _report(company, rng.choice(_FIRMS), rng.choice(_CITIES), filed.year - 1, block,
                         start_marker=status != "CamEnd",
                         tenure="firm" if status == "CamEst" else "auditor")
        cams = [CamTruth(rec.doc_id, n, t, d, p) for n, (t, d, p) in enumerate(truth, 1)]
        filings.append(Filing(rec, _ten_k(rng, company, report), f"cam-{style}", None, cams,
                              status))
    return filings


def all_filings(seed: int = 7) -> list[Filing]:
    rng = random.Random(seed)
    return sample_proxy_filings(rng) + _pay_filings(rng) + sample_10k_filings(rng) + _cam_filings(rng)


def build_corpus(root: str | Path, seed: int = 7) -> list[Filing]:
    root = Path(root)
    cache = root / "cache"
    filings = all_filings(seed)
    records = []
    for f in filings:
        path = cache_path_for(f.record, cache)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(f.html, encoding="utf-8")
        records.append(f.record)
    write_manifest(records, root / "manifest.csv")
    write_rows(root / "payratio_truth.csv", ["doc_id", "ceo_pay", "median_pay", "ratio_value"],
               [vars(f.pay) for f in filings if f.pay])
    write_rows(root / "cam_truth.csv", ["doc_id", "cam_number", "title", "description",
                                        "procedure"],
               [vars(c) for f in filings for c in f.cams])
    config = {
        "task": "both",
        "manifest": "manifest.csv",
        "cache_dir": "cache",
        "out_dir": "out",
        "truth": {"payratio": "payratio_truth.csv", "cam": "cam_truth.csv"},
        "backend": {"kind": "offline", "seed": seed},
        "batch_size": {"payratio": 1, "cam": 2},
        "budget": {"rpm": 500, "tpm": 200000, "max_outstanding": 500},
        "max_attempts": 5,
        "cooldown_s": 15,
        "seed": seed,
        "prices": {"usd_per_1m_input": 0.15, "usd_per_1m_output": 0.60},
    }
    (root / "config.yaml").write_text(yaml.safe_dump(config, sort_keys=False), encoding="utf-8")
    return filings
