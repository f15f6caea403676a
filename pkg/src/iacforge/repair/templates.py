"""Prompt templates.

Slots are written ``{name}``; ``{{`` and ``}}`` produce literal braces.
Rendering fails on any slot left unfilled.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from ..errors import MissingSlot

_SLOT_RE = re.compile(r"\{\{|\}\}|\{([A-Za-z_][A-Za-z0-9_]*)\}")

ALLOWED_PROVIDERS_TEXT = (
    "`aws`, `random`, `null`, `local`, `template`, `tls`, `time`, `external`, `http`, `archive`, `docker`, `terraform`"
)

_PREAMBLE = "You are an expert Infrastructure-as-Code (IaC) developer with deep expertise in Terraform.\n"

_EXAMPLES = """Here are three examples of correct Terraform HCL codes:

### Example-1
```hcl
{TF_example1}
```

### Example-2
```hcl
{TF_example2}
```

### Example-3
```hcl
{TF_example3}
```
"""

REPAIR_FV2 = (
    _PREAMBLE
    + """
You will be given:
(a) A Terraform configuration written in HCL, intended for Terraform v1.12.0. This code currently fails the terraform plan command.
(b) The error message output from running terraform plan.

Your task is to:
(a) Clearly explain the cause of the error in your own words.
(b) Describe how you will fix the issue.
(c) Provide a fully corrected version of the Terraform configuration (in HCL) that ensures terraform plan completes successfully.

Requirements:
(i) If the error indicates "timed out", it is possibly because Terraform waits for interactive input to fill a variable with no default value.
    Ensure that you add reasonable default values for all input variables for non-interactive execution.
(ii) You are permitted to modify any aspect of the Terraform code, including adding or removing entire blocks, arguments, or resources. Apply changes as rigorously as necessary to ensure that terraform plan completes successfully.
(iii) You must ensure compatibility with Terraform version 1.12.0.
(iv) You may remove problematic elements such as assume_role blocks or profile = "admin-1" if they can cause permission errors.
(v) Terraform will rely on default credentials (e.g., EC2 instance metadata or environment variables), so explicit credential configuration should be removed if problematic.
(vi) You are only allowed to change the Terraform code. Do not assume access to other configuration files or systems.

"""
    + _EXAMPLES
    + """
Here is the incorrect configuration (in Terraform HCL):
<incorrect_terraform_config>
```hcl
{config}
```
</incorrect_terraform_config>

Here is the error message obtained by running terraform plan command or a timeout notice if the command does not complete within 30 seconds:
<error_message>
{error_message}
</error_message>

Return the correct Terraform configuration within the following tags. Do not return empty code.
<corrected_terraform_config>
(Your entire Terraform configuration goes here)
</corrected_terraform_config>
"""
)

REPAIR_FV1 = (
    _PREAMBLE
    + """
You will be given:
(a) A Terraform configuration written in HCL, intended for Terraform v1.12.0. This code currently fails the terraform validate command.
(b) The error message output from running terraform validate.

Your task is to:
(a) Clearly explain the cause of the error in your own words.
(b) Describe how you will fix the issue.
(c) Provide a fully corrected version of the Terraform configuration (in HCL) that ensures terraform validate completes successfully.

Requirements:
(i) Fix syntax errors, malformed blocks, duplicate declarations and references to undeclared resources, variables or locals.
(ii) Add reasonable default values for all input variables so the configuration can later run non-interactively.
(iii) You must ensure compatibility with Terraform version 1.12.0.
(iv) Keep the intent of the original configuration; change only what is needed.
(v) You are only allowed to change the Terraform code. Do not assume access to other configuration files or systems.

"""
    + _EXAMPLES
    + """
Here is the incorrect configuration (in Terraform HCL):
<incorrect_terraform_config>
```hcl
{config}
```
</incorrect_terraform_config>

Here is the error message obtained by running terraform validate:
<error_message>
{error_message}
</error_message>

Return the correct Terraform configuration within the following tags. Do not return empty code.
<corrected_terraform_config>
(Your entire Terraform configuration goes here)
</corrected_terraform_config>
"""
)

POLICY_SCHEMA = """A policy is a JSON object with an "id" and a non-empty "rules" list. Each rule has a unique "name", a "predicate" and "params":
- resource_exists: params type
- resource_count_at_least: params type, n
- attribute_equals: params address, path (dot separated, list indices as numbers), value
- attribute_matches: params address, path, pattern (regular expression)
- dependency_exists: params from, to (resource addresses; from depends on to)
- provider_declared: params name"""

REPAIR_FV3 = (
    _PREAMBLE
    + """
You will be given:
(a) A user prompt describing infrastructure intent.
(b) A Terraform configuration that is known to deploy and that realises the prompt.
(c) A policy that is meant to verify the configuration against the prompt. It currently fails on the configuration.
(d) The result of evaluating the policy.

Your task is to:
(a) Explain why the failing rules fail.
(b) Provide a corrected policy that passes on the configuration while still covering every element of the prompt.

Requirements:
(i) Do not change the Terraform configuration; only the policy may change.
(ii) Do not drop rules merely to make the policy pass; rewrite them so they check the intent correctly.

"""
    + POLICY_SCHEMA
    + """

Here is the user prompt:
<user_prompt>
{prompt}
</user_prompt>

Here is the Terraform configuration:
<terraform_config>
```hcl
{config}
```
</terraform_config>

Here is the failing policy:
<incorrect_policy>
{policy}
</incorrect_policy>

Here is the evaluation result:
<error_message>
{error_message}
</error_message>

Return the corrected policy as JSON within the following tags.
<corrected_policy>
(Your entire policy goes here)
</corrected_policy>
"""
)

GEN_FEWSHOT = (
    _PREAMBLE
    + """
Your task is to:
Given an user prompt, generate a **single**, **fully self-contained**, and **valid** Terraform configuration written in HCL. Your configuration must:
- Satisfy the intent of the user prompt.
- Be compatible with **Terraform v1.12.0**.
- Pass both `terraform validate` and `terraform plan`.
- Include a valid `provider` block.
- Contain no undeclared variables or references.
- Avoid the use of `assume_role`, custom `profile` values, or external dependencies.
- Use only the following providers: """
    + ALLOWED_PROVIDERS_TEXT
    + """.

Here are a few examples:

### Example-1
Prompt: {prompt_example1}
Configuration:
```hcl
{TF_gen_example1}
```

### Example-2
Prompt: {prompt_example2}
Configuration:
```hcl
{TF_gen_example2}
```

### Example-3
Prompt: {prompt_example3}
Configuration:
```hcl
{TF_gen_example3}
```

Here is the **actual** user prompt:
<user_prompt>
{request}
</user_prompt>

Now respond to the actual user prompt by returning **one single** Terraform configuration. Do not repeat or revise the configuration. Importantly, enclose the final configuration inside the following tags:

<final_terraform_config>
(Provide your entire Terraform configuration within these tags)
</final_terraform_config>
"""
)

MUTN_FEWSHOT = (
    _PREAMBLE
    + """
Your task is to:
Given an existing Terraform configuration and an user prompt requesting changes, generate a **single**, **modified** Terraform configuration written in HCL that is **fully self-contained** and **valid**. Your configuration must:
- Be a modified version of the existing Terraform configuration.
- Satisfy the intent of the changes requested in the user prompt.
- Be compatible with **Terraform v1.12.0**.
- Pass both `terraform validate` and `terraform plan`.
- Include a valid `provider` block.
- Contain no undeclared variables or references.
- Avoid the use of `assume_role`, custom `profile` values, or external dependencies.
- Use only the following providers: """
    + ALLOWED_PROVIDERS_TEXT
    + """.

Here are a few examples:

### Example-1
Initial Configuration:
```hcl
{TF_init_example1}
```
Prompt: {prompt_example1}
Mutated Configuration:
```hcl
{TF_mutn_example1}
```

### Example-2
Initial Configuration:
```hcl
{TF_init_example2}
```
Prompt: {prompt_example2}
Mutated Configuration:
```hcl
{TF_mutn_example2}
```

### Example-3
Initial Configuration:
```hcl
{TF_init_example3}
```
Prompt: {prompt_example3}
Mutated Configuration:
```hcl
{TF_mutn_example3}
```

Here is the **initial Terraform configuration**:
<initial_terraform_config>
```hcl
{TF_init}
```
</initial_terraform_config>

Here is the **user prompt** requesting changes:
<user_prompt>
{prompt}
</user_prompt>

Now respond by returning **a single**, **modified** Terraform configuration. Importantly, enclose the final configuration inside the following tags:

<mutated_terraform_config>
(Provide your entire modified Terraform configuration within these tags)
</mutated_terraform_config>
"""
)

PROMPT_LEVELS = {
    "high": "Write a high-level prompt: a broad overview of what is provisioned, one or two sentences.",
    "mid": "Write a mid-level prompt: name the main resources and their key settings and relationships, without dictating syntax.",
    "low": "Write a low-level prompt that closely follows the configuration, mentioning each resource and its important arguments.",
}

PROMPT_GEN = (
    _PREAMBLE
    + """
Write a natural-language request from which an engineer could faithfully reconstruct the Terraform configuration below.
Begin with a directive verb (for example Generate, Set up, Deploy). Use a concise, goal-oriented tone that says what to provision rather than how.
{level_instruction}

<terraform_config>
```hcl
{config}
```
</terraform_config>

Return only the prompt within the following tags.
<prompt>
(Your prompt goes here)
</prompt>
"""
)

REPAIR_PROMPT = (
    _PREAMBLE
    + """
A reviewer compared a natural-language request with the Terraform configuration it should describe and found they are not aligned.
Revise the request so that it faithfully describes the configuration. Keep it concise, goal-oriented and starting with a directive verb.

<terraform_config>
```hcl
{config}
```
</terraform_config>

Current request:
<user_prompt>
{prompt}
</user_prompt>

Reviewer feedback:
<error_message>
{error_message}
</error_message>

Return only the revised request within the following tags.
<revised_prompt>
(Your revised request goes here)
</revised_prompt>
"""
)

POLICY_GEN = (
    _PREAMBLE
    + """
Write a machine-verifiable policy that checks whether a Terraform configuration satisfies the user prompt below.
The policy acts as a unit test over the planned resources. Cover every infrastructure element mentioned in the prompt; avoid trivial policies.

"""
    + POLICY_SCHEMA
    + """

<user_prompt>
{prompt}
</user_prompt>

<terraform_config>
```hcl
{config}
```
</terraform_config>

Return the policy as JSON within the following tags.
<policy>
(Your policy goes here)
</policy>
"""
)

CLONE_GEN = (
    _PREAMBLE
    + """
Write a different Terraform configuration that satisfies the same user prompt and the same policy as the configuration below.
The new configuration must be structurally different from the original (not a reformatting of it), must pass terraform validate and terraform plan, and must pass every rule of the policy.
Use only the following providers: """
    + ALLOWED_PROVIDERS_TEXT
    + """.

<user_prompt>
{prompt}
</user_prompt>

<terraform_config>
```hcl
{config}
```
</terraform_config>

<policy>
{policy}
</policy>

Return the new configuration within the following tags.
<cloned_terraform_config>
(Your entire Terraform configuration goes here)
</cloned_terraform_config>
"""
)

MUTATION_GEN = (
    _PREAMBLE
    + """
Propose a realistic change to the Terraform configuration below: alter or add resources, providers or variables.
Produce three artifacts that stay consistent with each other:
(a) the mutated configuration, which must pass terraform validate and terraform plan;
(b) an updated policy that the mutated configuration passes and that differs from the current policy;
(c) a concise natural-language request, starting with a directive verb, that asks for exactly this change.

"""
    + POLICY_SCHEMA
    + """

<initial_terraform_config>
```hcl
{config}
```
</initial_terraform_config>

Current policy:
<policy>
{policy}
</policy>

Original request for the configuration:
<user_prompt>
{prompt}
</user_prompt>

Return the three artifacts within these tags:
<mutated_terraform_config>
(The entire mutated configuration)
</mutated_terraform_config>
<mutated_policy>
(The updated policy as JSON)
</mutated_policy>
<mutation_prompt>
(The change request)
</mutation_prompt>
"""
)

REPAIR_MUTATION = (
    _PREAMBLE
    + """
A proposed mutation of a Terraform configuration failed verification. Fix it.
The mutation consists of a mutated configuration, an updated policy that must differ from the current policy and pass on the mutated configuration, and a change request that must describe the change faithfully.

"""
    + POLICY_SCHEMA
    + """

<initial_terraform_config>
```hcl
{config}
```
</initial_terraform_config>

Current policy:
<policy>
{policy}
</policy>

Proposed mutation:
<proposed_mutation>
{bundle}
</proposed_mutation>

Verification result:
<error_message>
{error_message}
</error_message>

Return the corrected mutation within the following tags, keeping the inner tags:
<corrected_mutation>
<mutated_terraform_config>
(The entire mutated configuration)
</mutated_terraform_config>
<mutated_policy>
(The updated policy as JSON)
</mutated_policy>
<mutation_prompt>
(The change request)
</mutation_prompt>
</corrected_mutation>
"""
)

JUDGE_ALIGN = """You are a cloud infrastructure expert reviewing whether a natural-language request and a Terraform configuration describe the same infrastructure.

<user_prompt>
{prompt}
</user_prompt>

<terraform_config>
```hcl
{config}
```
</terraform_config>

Decide whether the configuration faithfully realises the request, with nothing important missing or contradicting it.
Answer on the first line with exactly "VERDICT: YES" or "VERDICT: NO".
On the following lines give short, concrete feedback listing any mismatches.
"""


@dataclass(frozen=True)
class PromptTemplate:
    id: str
    body: str

    @property
    def slots(self) -> tuple[str, ...]:
        names = [m.group(1) for m in _SLOT_RE.finditer(self.body) if m.group(1)]
        return tuple(dict.fromkeys(names))


TEMPLATES: dict[str, PromptTemplate] = {
    t.id: t
    for t in (
        PromptTemplate("repair-fv1", REPAIR_FV1),
        PromptTemplate("repair-fv2", REPAIR_FV2),
        PromptTemplate("repair-fv3", REPAIR_FV3),
        PromptTemplate("repair-prompt", REPAIR_PROMPT),
        PromptTemplate("repair-mutation", REPAIR_MUTATION),
        PromptTemplate("gen-fewshot", GEN_FEWSHOT),
        PromptTemplate("mutn-fewshot", MUTN_FEWSHOT),
        PromptTemplate("prompt-gen", PROMPT_GEN),
        PromptTemplate("policy-gen", POLICY_GEN),
        PromptTemplate("clone-gen", CLONE_GEN),
        PromptTemplate("mutation-gen", MUTATION_GEN),
        PromptTemplate("judge-align", JUDGE_ALIGN),
    )
}


def get_template(template_id: str) -> PromptTemplate:
    try:
        return TEMPLATES[template_id]
    except KeyError:
        raise KeyError(f"unknown template {template_id!r}") from None


def render_prompt(template: PromptTemplate | str, slots: dict[str, str]) -> str:
    """Substitute every slot; raise :class:`MissingSlot` for the first one absent."""
    if isinstance(template, str):
        template = get_template(template)
    for name in template.slots:
        if name not in slots:
            raise MissingSlot(name)

    def fill(m: re.Match) -> str:
        token = m.group(0)
        if token == "{{":
            return "{"
        if token == "}}":
            return "}"
        return str(slots[m.group(1)])

    return _SLOT_RE.sub(fill, template.body)


EXAMPLE_CONFIGS = (
    """provider "aws" {
  region = "us-east-1"
}

resource "aws_s3_bucket" "logs" {
  bucket = "example-log-bucket"
}

resource "aws_s3_bucket_versioning" "logs" {
  bucket = aws_s3_bucket.logs.id

  versioning_configuration {
    status = "Enabled"
  }
}""",
    """provider "aws" {
  region = "us-west-2"
}

variable "instance_type" {
  type    = string
  default = "t3.micro"
}

resource "aws_instance" "web" {
  ami           = "ami-0123456789abcdef0"
  instance_type = var.instance_type

  tags = {
    Name = "web"
  }
}""",
    """provider "random" {}

resource "random_pet" "name" {
  length = 2
}

output "name" {
  value = random_pet.name.id
}""",
)

EXAMPLE_PROMPTS = (
    "Create an S3 bucket for logs with versioning enabled.",
    "Deploy a t3.micro EC2 instance tagged web, with the instance type configurable.",
    "Generate a random two-word pet name and output it.",
)


def example_slots() -> dict[str, str]:
    """Few-shot slots shared by the repair templates."""
    return {f"TF_example{i}": cfg for i, cfg in enumerate(EXAMPLE_CONFIGS, start=1)}


def gen_example_slots() -> dict[str, str]:
    slots = {}
    for i, (prompt, cfg) in enumerate(zip(EXAMPLE_PROMPTS, EXAMPLE_CONFIGS), start=1):
        slots[f"prompt_example{i}"] = prompt
        slots[f"TF_gen_example{i}"] = cfg
    return slots
