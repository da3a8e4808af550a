#pragma once

#include <map>
#include <set>
#include <string>
#include <string_view>

namespace hpoloop {

// Creator prompt. Placeholders: {model_info} {dataset_info}
// {hyperparameter_info} {tool_names} {optim_goal} {agent_scratchpad}.
extern const std::string_view kCreatorTemplate;

// Executor prompt. Placeholders: {tool_names} {task_name} {agent_scratchpad}.
extern const std::string_view kExecutorTemplate;

// Single-pass substitution of {name} placeholders; substituted text is never
// rescanned. Placeholders listed in `deferred` are left in place. Throws
// TemplateError for any other unfilled placeholder or an empty value.
std::string render_template(std::string_view tmpl, const std::map<std::string, std::string>& values,
                            const std::set<std::string>& deferred = {});

}  // namespace hpoloop
