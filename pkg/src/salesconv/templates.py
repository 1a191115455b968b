"""Template banks for the synthetic conversation generator.

Customer turns compose an event clause (sentiment-neutral wording that may
carry objection/interest phrases) with an optional sentiment-flavored
clause revealing how the customer currently feels. Flavor clauses are the
only place sentiment-lexicon words appear, which is what makes adversarial
inversion exact under zero noise.

The out-of-distribution bank mirrors the structure with a disjoint content
vocabulary (ship chartering instead of software sales).
"""

from __future__ import annotations

INDUSTRIES = [
    "saas",
    "fintech",
    "healthcare",
    "retail",
    "manufacturing",
    "insurance",
    "real_estate",
    "telecom",
    "education",
    "logistics",
    "hospitality",
    "automotive",
    "energy",
    "media",
    "cybersecurity",
]

INDUSTRY_PRODUCTS = {
    "saas": ["workflow suite", "analytics platform"],
    "fintech": ["payments gateway", "reconciliation api"],
    "healthcare": ["scheduling system", "patient portal"],
    "retail": ["inventory tracker", "loyalty program"],
    "manufacturing": ["maintenance suite", "floor telemetry kit"],
    "insurance": ["claims triage tool", "policy engine"],
    "real_estate": ["listing syndicator", "tenant portal"],
    "telecom": ["network monitor", "provisioning stack"],
    "education": ["course builder", "enrollment manager"],
    "logistics": ["route optimizer", "fleet dashboard"],
    "hospitality": ["booking engine", "guest messaging hub"],
    "automotive": ["dealer crm", "service scheduler"],
    "energy": ["grid telemetry suite", "usage forecaster"],
    "media": ["ad inventory manager", "subscriber toolkit"],
    "cybersecurity": ["threat triage console", "endpoint shield"],
}

OBJECTION_KINDS = ["price", "timing", "trust", "competitor"]

EVENT_KINDS = [
    "objection_raise",
    "objection_resolve",
    "interest_signal",
    "question",
    "smalltalk",
]

FLAVORS = ["very_neg", "neg", "neu", "pos", "very_pos"]

# Sentiment-neutral event clauses. Objection clauses embed phrases from the
# shipped objection lexicon; interest clauses embed interest-lexicon phrases.
CUSTOMER_OBJECTION_RAISE = {
    "price": [
        "I have to flag that the {product} tier looks too expensive for our budget this year.",
        "The quote you sent is over our budget by a real margin.",
        "That pricing is steep next to what we pay today.",
        "We cannot justify the price at the volume we run.",
    ],
    "timing": [
        "This is probably not the right time for a rollout on our side.",
        "We would want to revisit later, likely next quarter.",
        "Our timeline is tight until the fiscal year closes.",
    ],
    "trust": [
        "We have some security concerns about handing over our data.",
        "Candidly, we had never heard of you before this call.",
        "I would need proof of credibility before going further.",
    ],
    "competitor": [
        "We are already using another vendor for most of this.",
        "Your competitor quoted us something similar last month.",
        "The switching costs from our current provider look heavy.",
    ],
}

CUSTOMER_OBJECTION_RESOLVE = {
    "price": [
        "On reflection, the numbers on the {product} plan can fit within our budget.",
        "Finance signed off, so the pricing question is settled.",
    ],
    "timing": [
        "We found room in the schedule, so timing is no longer a blocker.",
        "The board moved our review up, so the calendar works now.",
    ],
    "trust": [
        "The reference customers put our diligence questions to rest.",
        "Your compliance answers cleared the bar for our review team.",
    ],
    "competitor": [
        "We decided to move off our current provider regardless.",
        "The incumbent contract lapses, so we are free to choose.",
    ],
}

CUSTOMER_INTEREST = [
    "Could you tell me more about the onboarding flow?",
    "Please send over the details on the integration.",
    "Walk me through how reporting would work for us.",
    "How do we start a pilot with the {product}?",
]

CUSTOMER_QUESTION = [
    "How does support work across time zones?",
    "What does a usual deployment take in weeks?",
    "Which plan covers the analytics module?",
    "Who handles the data migration on your side?",
    "Does the {product} keep an audit trail per user?",
]

CUSTOMER_SMALLTALK = [
    "Busy week over here, lots of meetings.",
    "We just wrapped our quarterly planning.",
    "Half the office is remote these days, anyway.",
    "Conference season has the calendar packed.",
]

# Flavor clauses are where sentiment-lexicon words live, one polarity each.
FLAVOR_CLAUSES = {
    "very_pos": [
        "I'm thrilled with what I'm seeing so far.",
        "This looks fantastic for our team.",
        "Honestly, I love the direction here.",
        "The whole package sounds excellent.",
    ],
    "pos": [
        "Overall this sounds promising.",
        "That's a helpful way to frame it.",
        "I'm feeling good about the fit.",
        "This could be a great step for us.",
    ],
    "neu": [
        "Noted, let me run that by the team.",
        "Okay, I'll note that down.",
        "Let me sit with that for a bit.",
    ],
    "neg": [
        "I'm still hesitant about the whole thing.",
        "To be frank, I'm skeptical this works for us.",
        "I remain unsure this is the right fit.",
        "My team is lukewarm on this.",
    ],
    "very_neg": [
        "Frankly this feels like a waste of our time.",
        "I'm getting frustrated with how this is going.",
        "So far this has been disappointing.",
        "This pitch is starting to feel pointless.",
    ],
}

# Appended when the latent customer is engaged; lengthens the message.
CUSTOMER_ELABORATIONS = [
    "For context, we compared three options internally and the shortlist came down to scope and rollout effort.",
    "To give background, our ops group tracks this weekly and reports it upstream to the steering group.",
    "Worth adding that two regional teams would adopt this in the first wave if we proceed.",
    "As background, the last tool swap took us a full quarter of migrations and retraining.",
]

REP_OPENERS = [
    "Hi, thanks for taking the time today, I wanted to discuss the {product}.",
    "Good morning, appreciate you joining, shall we pick up on the {product}?",
    "Hello again, I pulled together the notes on the {product} from last time.",
]

REP_TECHNIQUE = {
    "spin": [
        "What happens if the current process stays as it is next year?",
        "How is that affecting your team's output day to day?",
        "What problem does that create for your downstream reporting?",
    ],
    "value_selling": [
        "Teams your size usually see clear cost savings within a quarter.",
        "The return on investment shows up once the manual steps go away.",
        "Let me quantify the value for your specific volume.",
    ],
    "consultative": [
        "Help me understand your goals for this rollout.",
        "I want to recommend based on what your workflow actually needs.",
        "We can tailor the rollout to your compliance setup.",
    ],
    "challenger": [
        "Most teams get this wrong by automating the noisiest step first.",
        "Let me reframe how you are measuring this cost.",
        "I will push back gently on the conventional approach there.",
    ],
}

REP_NEUTRAL = [
    "The {product} bundles the reporting and the alerting in one plan.",
    "I can have a summary deck over to you by tomorrow.",
    "Our rollout usually runs in two phases over six weeks.",
    "You would keep your current data model, we map onto it.",
]

REP_WEAK = [
    "Just checking in again on this.",
    "Any update on your side?",
    "Circling back once more on the earlier thread.",
    "Did you get a chance to look at the doc?",
]

REP_ADDRESS_OBJECTION = {
    "price": [
        "On cost, the annual tier drops the per seat number substantially.",
        "We can stage the licence so the spend lands next fiscal year.",
    ],
    "timing": [
        "We can hold your slot and begin the paperwork whenever suits.",
        "A phased start in eight weeks keeps your calendar clear.",
    ],
    "trust": [
        "I'll send the audit reports and two reference customers in your sector.",
        "Our compliance pack covers the certifications your review needs.",
    ],
    "competitor": [
        "We migrate off your current provider with a parallel run, no gap.",
        "I can map our plan against the incumbent line by line.",
    ],
}


def render(template: str, product: str) -> str:
    return template.replace("{product}", product)


# --- Out-of-distribution bank: ship chartering, disjoint content words ---

OOD_PRODUCTS = ["bulk carrier", "refit package", "salvage retainer"]

OOD_CUSTOMER_OBJECTION_RAISE = {
    "price": [
        "The charter rate on the vessel runs past what the owners will wear.",
        "The demurrage exposure alone sinks the arithmetic.",
    ],
    "timing": [
        "The drydock window clashes with the survey, the laycan cannot bend.",
        "The hull is committed until the monsoon lull.",
    ],
    "trust": [
        "The classification papers for the hull remain unverified.",
        "No broker this side has fixed with your house before.",
    ],
    "competitor": [
        "Another brokerage holds the owners' ear for this tonnage.",
        "A rival house tendered for the same hull yesterday.",
    ],
}

OOD_CUSTOMER_OBJECTION_RESOLVE = {
    "price": [
        "The owners cleared the charter rate after the surveyor's note.",
        "The demurrage clause was softened, the arithmetic floats.",
    ],
    "timing": [
        "The berth freed up, the laycan is workable.",
        "The drydock slipped a fortnight, the window opens.",
    ],
    "trust": [
        "The classification society stamped the hull papers.",
        "The P&I club vouched for the fixture.",
    ],
    "competitor": [
        "The rival house withdrew its tender this morning.",
        "The owners tired of the other brokerage's terms.",
    ],
}

OOD_CUSTOMER_INTEREST = [
    "Sketch the laycan terms for the second hull.",
    "Run me through the bunker clause once more.",
    "Lay out the stevedoring arrangements at the discharge quay.",
]

OOD_CUSTOMER_QUESTION = [
    "Which tide window suits the pilot boarding?",
    "Who carries the stevedore fees at the discharge quay?",
    "Does the manifest cover the deck cargo lashings?",
]

OOD_CUSTOMER_SMALLTALK = [
    "Rough swells off the cape this week.",
    "The harbourmaster swapped the berth rota again.",
    "Fog held the pilots ashore till noon.",
]

OOD_FLAVOR_CLAUSES = {
    "very_pos": [
        "The fixture shapes up splendidly.",
        "A superb hull, candidly.",
    ],
    "pos": [
        "The fixture trends favourably.",
        "The terms sit agreeably with the owners.",
    ],
    "neu": [
        "The owners will chew on it.",
        "We shall weigh it against the rota.",
    ],
    "neg": [
        "The owners grow wary of the terms.",
        "The fixture drifts toward murky water.",
    ],
    "very_neg": [
        "A dismal fixture, frankly.",
        "The terms read as dreadful from the owners' chair.",
    ],
}

OOD_REP_OPENERS = [
    "Morning, the brokerage rang regarding the {product}.",
    "Greetings, shall we revisit the fixture on the {product}?",
]

OOD_REP_NEUTRAL = [
    "The owners would entertain a voyage charter on the {product}.",
    "The surveyor files the condition report by Thursday.",
    "Bunkers are priced off the Rotterdam index this fixture.",
]

OOD_REP_WEAK = [
    "Nudging the thread on the fixture.",
    "Any word from the owners' side?",
]

OOD_CUSTOMER_ELABORATIONS = [
    "Mind, the stevedores at the discharge quay bill overtime past the evening tide.",
    "The owners weigh every fixture against the scrapyard arithmetic these days.",
]
