#!/usr/bin/env python3
"""Regenerates the shipped synthetic corpus and mock fixtures under data/.

The corpus is a miniature eight-domain event set with hand-picked
frequencies. The fixture file scripts every agent reply the pipeline will
request for it and pins an embedding vector for every text the pipeline
embeds, so `pipeline --mock` runs the full induce/expand/enrich path
deterministically. Rerun after changing the corpus design; the output is
committed.
"""

import json
import os

HERE = os.path.dirname(os.path.abspath(__file__))
DATA = os.path.join(HERE, "..", "data")

DIM = 128

# Must match the built-in domain descriptions character for character: the
# domain root nodes embed as "<name>：<description>".
DOMAINS = {
    "Politics": (
        "Events related to state governance, power structures, policy formulation "
        "and implementation, as well as judicial and legal affairs."
    ),
    "Military": (
        "Events related to warfare, military operations, strategic planning, and "
        "army organization and management."
    ),
    "Diplomacy": (
        "Inter-state political and cultural interactions conducted through official "
        "channels, such as envoy missions, tribute relations, and peace negotiations."
    ),
    "Society": (
        "Social activities, cultural practices, customs, and collective events "
        "involving groups, organizations, or institutions beyond the individual level."
    ),
    "Ritual": (
        "Ceremonial and ritual activities conducted by ancient states or royal families."
    ),
    "Economy-Livelihood": (
        "Events related to economic production, resource distribution, daily "
        "subsistence, and state finance."
    ),
    "Nature": (
        "Natural phenomena, related events, and their impacts on human society."
    ),
    "Individual": (
        "Events related to individual life trajectories, identity attributes, "
        "personal behaviors, and social relationships."
    ),
}

# event type -> corpus frequency, grouped by domain (60 types total)
TYPES = {
    "Politics": {
        "詔令": 6, "變法": 4, "官員任免": 4, "科舉取士": 3,
        "律令頒行": 3, "巡幸": 2, "立儲": 2, "郡縣設置": 2,
    },
    "Military": {
        "叛亂": 7, "起事": 5, "征伐": 4, "圍城": 3,
        "大捷": 3, "戍邊": 2, "練兵": 2, "軍屯廢置": 1,
    },
    "Diplomacy": {
        "遣使": 5, "會盟": 4, "和親": 3, "冊封外藩": 3,
        "歲幣": 2, "互市": 2, "質子": 1,
    },
    "Society": {
        "遷徙": 5, "賑濟": 4, "築城": 3, "立碑": 3,
        "修志": 2, "結社": 2, "宴饗": 2, "學校興廢": 1,
    },
    "Ritual": {
        "祭天": 6, "宗廟祭祀": 4, "封禪": 3, "郊祀": 2,
        "諡號追贈": 2, "大赦": 2, "改元": 1,
    },
    "Economy-Livelihood": {
        "賦稅調整": 5, "鑄錢": 4, "漕運": 3, "屯田墾殖": 3,
        "鹽鐵專賣": 2, "荒政": 2, "水利興修": 2, "度量衡": 1,
    },
    "Nature": {
        "日食": 5, "地震": 4, "水災": 3, "旱災": 3,
        "蝗災": 2, "星變": 2, "瘟疫": 1,
    },
    "Individual": {
        "拜相": 5, "致仕": 4, "封爵": 3, "流放": 3,
        "殉節": 2, "隱逸": 2, "著述": 1,
    },
}

# merger output per domain: (parent label, definition, [children])
GROUPS = {
    "Politics": [
        ("君主政令", "君主直接發出或涉及皇權運作的政事", ["詔令", "立儲", "巡幸"]),
        ("官僚行政", "官僚體系的選任與地方治理事務", ["官員任免", "科舉取士", "郡縣設置"]),
        ("法制變革", "法律制度的頒行與制度變革", ["變法", "律令頒行"]),
    ],
    "Military": [
        ("軍事衝突", "武裝對抗與作戰行動", ["叛亂", "起事", "征伐", "圍城", "大捷"]),
        ("邊防軍務", "邊疆駐防與守備事務", ["戍邊", "軍屯廢置"]),
        ("軍隊建設", "軍隊的訓練與組織管理", ["練兵"]),
    ],
    "Diplomacy": [
        ("使節往來", "政權之間的使節派遣與人質安排", ["遣使", "質子"]),
        ("盟約和議", "政權之間的會盟與和平安排", ["會盟", "和親"]),
        ("朝貢體制", "封貢秩序下的冊封與貢賦往來", ["冊封外藩", "歲幣", "互市"]),
    ],
    "Society": [
        ("民間遷移與救濟", "人口流動與官府救濟活動", ["遷徙", "賑濟"]),
        ("營造與記述", "公共營造與文獻記述活動", ["築城", "立碑", "修志", "學校興廢"]),
        ("群體活動", "民間結社與集體宴饗", ["結社", "宴饗"]),
    ],
    "Ritual": [
        ("國家祭祀", "國家層面的祭祀典禮", ["祭天", "宗廟祭祀", "封禪", "郊祀"]),
        ("恩典禮制", "朝廷恩典與名號禮制", ["諡號追贈", "大赦", "改元"]),
    ],
    "Economy-Livelihood": [
        ("國家財計", "國家財政收入與貨幣度量制度", ["賦稅調整", "鑄錢", "鹽鐵專賣", "度量衡"]),
        ("農政民生", "農業生產與民生保障", ["屯田墾殖", "荒政", "水利興修"]),
        ("轉輸貿易", "物資轉運與流通", ["漕運"]),
    ],
    "Nature": [
        ("天象", "天文現象及其觀測記錄", ["日食", "星變"]),
        ("災害", "自然災害及其影響", ["地震", "水災", "旱災", "蝗災", "瘟疫"]),
    ],
    "Individual": [
        ("仕宦生涯", "個人官職升黜與退休", ["拜相", "致仕", "封爵", "流放"]),
        ("立身行事", "個人操守與生平活動", ["殉節", "隱逸", "著述"]),
    ],
}

BOOKS = ["史記", "漢書", "後漢書", "三國志", "晉書", "宋書"]
EXTRACTORS = ["mock-extract-a", "mock-extract-b", "mock-extract-c"]

SIBLING = ("屯田", "軍隊在邊地墾田自給的制度")            # expansion: Military layer 1
INTERMEDIATE = ("銓選制度", "任官與選才的制度性安排",
                "官僚行政", ["官員任免", "科舉取士"])      # expansion: Politics layer 1

TOPICS = [
    {"id": 7, "label": "外交朝貢", "top_words": ["朝貢", "貢物", "來聘", "番邦", "歲貢"]},
    {"id": 11, "label": "鹽政", "top_words": ["榷鹽", "鹽引", "鹽課", "鹽場"]},
]
RELATIONS = [
    {"name": "君臣", "source": "historical biographical database"},
]

TOPIC_CANDIDATES = {
    "外交朝貢": [("朝貢", "封貢體系下的來朝與進貢往來", "Diplomacy", "朝貢體制")],
    "鹽政": [("榷鹽", "官府對食鹽的專營與徵榷", "Economy-Livelihood", "國家財計")],
}
RELATION_CANDIDATES = {
    # near-duplicate of the 官員任免 leaf: positioned as Duplicate
    "君臣": [("任命", "授予官職的人事行為", "Politics", None)],
}

UNCOVERED_HELDOUT = ["海上貿易", "佛寺修建", "城市消防", "報刊發行", "鐵路修築", "議會選舉"]
COVERED_HELDOUT = ["征伐", "會盟", "遷徙", "封禪", "漕運", "日食", "拜相", "詔令",
                   "科舉取士", "和親", "賑濟", "鑄錢", "變法", "起事"]


def ranked(domain):
    """Frequency-desc, label-asc order; mirrors the induction rank order."""
    return sorted(TYPES[domain], key=lambda t: (-TYPES[domain][t], t))


def main():
    synth = os.path.join(DATA, "synthetic")
    reference = os.path.join(DATA, "reference")
    os.makedirs(synth, exist_ok=True)
    os.makedirs(reference, exist_ok=True)

    # ------------------------------------------------------------------ events
    events = []
    book_i = 0
    for domain in DOMAINS:
        for t, count in TYPES[domain].items():
            for k in range(count):
                book = BOOKS[book_i % len(BOOKS)]
                book_i += 1
                events.append({
                    "text": f"是歲{t}，事具{book}。",
                    "event_type": t,
                    "trigger": t,
                    "book": book,
                    "chapter": f"卷{1 + k % 4}",
                    "extractor": EXTRACTORS[k % len(EXTRACTORS)],
                })
    with open(os.path.join(synth, "events.jsonl"), "w", encoding="utf-8") as f:
        for e in events:
            f.write(json.dumps(e, ensure_ascii=False, sort_keys=True) + "\n")

    with open(os.path.join(synth, "topics.json"), "w", encoding="utf-8") as f:
        json.dump(TOPICS, f, ensure_ascii=False, indent=2, sort_keys=True)
    with open(os.path.join(synth, "relations.json"), "w", encoding="utf-8") as f:
        json.dump(RELATIONS, f, ensure_ascii=False, indent=2, sort_keys=True)

    heldout = COVERED_HELDOUT + UNCOVERED_HELDOUT
    with open(os.path.join(synth, "heldout.jsonl"), "w", encoding="utf-8") as f:
        for t in heldout:
            f.write(json.dumps({
                "text": f"他卷所見{t}。", "event_type": t, "trigger": t,
                "book": "新唐書", "chapter": "外篇", "extractor": "mock-extract-a",
            }, ensure_ascii=False, sort_keys=True) + "\n")

    # ------------------------------------------------------------ embeddings
    # one own axis per concept + a shared per-domain axis; weights by level
    axes = {}

    def axis(name):
        if name not in axes:
            axes[name] = len(axes)
            if len(axes) > DIM:
                raise RuntimeError("embedding dimension exhausted")
        return axes[name]

    sparse = {}

    def pin(text, components):
        sparse[text] = {str(i): w for i, w in components.items() if w != 0.0}

    for domain, desc in DOMAINS.items():
        pin(f"{domain}：{desc}", {axis(f"dom:{domain}"): 1.0})
    for domain in DOMAINS:
        for label, definition, _children in GROUPS[domain]:
            pin(f"{label}：{definition}",
                {axis(f"own:{label}"): 1.0, axis(f"dom:{domain}"): 0.35})
        for t in TYPES[domain]:
            if t == "起事":
                continue  # engineered near-duplicate, pinned below
            pin(t, {axis(f"own:{t}"): 1.0, axis(f"dom:{domain}"): 0.25})
    # 起事 sits on 叛亂's axis with its own residual: cosine ~0.92 against 叛亂
    pin("起事", {axis("own:叛亂"): 1.0, axis("dom:Military"): 0.25, axis("own:起事"): 0.45})

    pin(f"{SIBLING[0]}：{SIBLING[1]}",
        {axis(f"own:{SIBLING[0]}"): 1.0, axis("dom:Military"): 0.35})
    pin(f"{INTERMEDIATE[0]}：{INTERMEDIATE[1]}",
        {axis(f"own:{INTERMEDIATE[0]}"): 1.0, axis("dom:Politics"): 0.35})

    for topic_label, cands in TOPIC_CANDIDATES.items():
        for label, definition, domain, _parent in cands:
            pin(f"{label}：{definition}",
                {axis(f"own:{label}"): 1.0, axis(f"dom:{domain}"): 0.25})
    # 任命 rides the 官員任免 axis so the redundancy check flags it
    for label, definition, domain, _parent in RELATION_CANDIDATES["君臣"]:
        pin(f"{label}：{definition}",
            {axis("own:官員任免"): 1.0, axis(f"dom:{domain}"): 0.25, axis(f"own:{label}"): 0.43})

    for t in UNCOVERED_HELDOUT:
        pin(t, {axis(f"own:{t}"): 1.0})

    # ------------------------------------------------------------ chat rules
    chat = {}

    classify = []
    for domain in DOMAINS:
        for t in TYPES[domain]:
            classify.append({"match": {"event_type": t},
                             "response": {"domain": domain}})
    chat["classify"] = classify

    generate = []
    for domain in DOMAINS:
        order = ranked(domain)
        for gi, model in enumerate(["mock-gen-a", "mock-gen-b"]):
            partition = order[gi::2]
            if not partition:
                continue
            generate.append({
                "match": {"_model": model, "domain": domain},
                "response": [{
                    "label": f"{domain}彙整{'甲' if gi == 0 else '乙'}",
                    "definition": "初步彙整的一組相近事件類型",
                    "children": partition,
                }],
            })
    chat["generate"] = generate

    merge = []
    for domain in DOMAINS:
        merge.append({
            "match": {"domain": domain},
            "response": [
                {"label": label, "definition": definition, "children": children}
                for label, definition, children in GROUPS[domain]
            ],
        })
    chat["merge"] = merge

    chat["judge"] = [
        {"match": {"label_a": "叛亂"}, "response": {"keep": "A"}},
        {"default": True, "response": {"keep": "A"}},
    ]

    # layer sweep call order: Politics L1..L3, Military L1..L2, then two
    # calls per remaining domain; one-shot rules consumed in that order
    empty_edits = {"siblings": [], "intermediates": [], "reassign": []}
    expand = [
        {"response": {  # Politics layer 1: insert the intermediate
            "siblings": [],
            "intermediates": [{
                "label": INTERMEDIATE[0], "definition": INTERMEDIATE[1],
                "parent": INTERMEDIATE[2], "children": INTERMEDIATE[3],
            }],
            "reassign": [],
        }},
        {"response": empty_edits},  # Politics layer 2
        {"response": empty_edits},  # Politics layer 3 (adopted leaves)
        {"response": {  # Military layer 1: add the missing sibling
            "siblings": [{"label": SIBLING[0], "definition": SIBLING[1]}],
            "intermediates": [], "reassign": [],
        }},
    ]
    expand += [{"response": empty_edits}] * 13  # Military L2 + six domains x2
    expand.append({"default": True, "response": empty_edits})
    chat["expand"] = expand

    chat["conceptualize_topic"] = [
        {"match": {"label": topic_label},
         "response": [{"label": label, "definition": definition}
                      for label, definition, _d, _p in cands]}
        for topic_label, cands in TOPIC_CANDIDATES.items()
    ]
    chat["conceptualize_relation"] = [
        {"match": {"name": name},
         "response": [{"label": label, "definition": definition}
                      for label, definition, _d, _p in cands]}
        for name, cands in RELATION_CANDIDATES.items()
    ]

    predict, position = [], []
    freq_domains = {"叛亂": "Military", "祭天": "Ritual", "詔令": "Politics"}
    for label, domain in freq_domains.items():
        predict.append({"match": {"label": label}, "response": {"domain": domain}})
    for cands in list(TOPIC_CANDIDATES.values()) + list(RELATION_CANDIDATES.values()):
        for label, _definition, domain, parent in cands:
            predict.append({"match": {"label": label}, "response": {"domain": domain}})
            if parent:
                position.append({"match": {"label": label},
                                 "response": {"parent": parent}})
    chat["predict_domain"] = predict
    chat["position"] = position

    chat["granularity"] = [{"default": True, "response": {"more_specific": True}}]

    fixtures = {
        "chat": chat,
        "embeddings": {"dimension": DIM, "sparse": sparse},
    }
    with open(os.path.join(synth, "fixtures.json"), "w", encoding="utf-8") as f:
        json.dump(fixtures, f, ensure_ascii=False, indent=1, sort_keys=True)

    config = {
        "threshold": 0.6,
        "frequency_threshold": 5,
        "retry_max": 3,
        "retry_backoff_ms": 0,
        "parallelism": 1,
        "rate_limit_per_minute": 0,
        "embedding": {"model": "mock-embed", "dimension": DIM},
        "templates": "templates",
        "roles": {
            "extractor": [{"model": m, "temperature": 0} for m in EXTRACTORS],
            "generator": [{"model": "mock-gen-a", "temperature": 0},
                          {"model": "mock-gen-b", "temperature": 0}],
            "classifier": {"model": "mock-mid", "temperature": 0},
            "conceptualizer": {"model": "mock-mid", "temperature": 0},
            "granularity_judge": {"model": "mock-mid", "temperature": 0},
            "merger": {"model": "mock-strong"},
            "judger": {"model": "mock-strong"},
            "expander": {"model": "mock-strong"},
            "enricher": {"model": "mock-strong"},
        },
    }
    with open(os.path.join(synth, "config.json"), "w", encoding="utf-8") as f:
        json.dump(config, f, ensure_ascii=False, indent=2, sort_keys=True)

    # --------------------------------------------------------- reference data
    with open(os.path.join(reference, "domain_event_counts.json"), "w",
              encoding="utf-8") as f:
        json.dump({
            "Politics": 1681, "Military": 690, "Diplomacy": 168, "Society": 710,
            "Ritual": 202, "Economy-Livelihood": 283, "Nature": 119,
            "Individual": 1023,
        }, f, indent=2, sort_keys=True)
    with open(os.path.join(reference, "structural_reference.json"), "w",
              encoding="utf-8") as f:
        json.dump({"name": "reference", "max_depth": 6, "avg_depth": 3.93,
                   "branch_factor": 2.43}, f, indent=2, sort_keys=True)

    print(f"events: {len(events)}, pinned embeddings: {len(sparse)}, axes: {len(axes)}")


if __name__ == "__main__":
    main()
